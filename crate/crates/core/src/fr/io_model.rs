use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Precision;
use crate::equations;

#[derive(Debug, Error, PartialEq)]
pub enum IoError {
    #[error(transparent)]
    Equation(#[from] equations::EquationError),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("new data I/O is zero")]
    ZeroTraffic,
    #[error("{threads} threads per block is not a multiple of {per_element} threads per element")]
    NonDivisible { threads: usize, per_element: usize },
}

/// Pipeline stages whose traffic is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Flux evaluation.
    Stage2,
    /// Partially corrected flux divergence.
    Stage3,
    /// Negation and source term.
    Stage6,
    Fused23,
    Fused236,
}

impl FromStr for Stage {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2" | "stage2" => Ok(Stage::Stage2),
            "3" | "stage3" => Ok(Stage::Stage3),
            "6" | "stage6" => Ok(Stage::Stage6),
            "fused23" => Ok(Stage::Fused23),
            "fused236" => Ok(Stage::Fused236),
            other => Err(IoError::UnknownStage(other.to_string())),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Stage2 => "stage2",
            Stage::Stage3 => "stage3",
            Stage::Stage6 => "stage6",
            Stage::Fused23 => "fused23",
            Stage::Fused236 => "fused236",
        })
    }
}

/// Words read and written per solution point per element.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataIO {
    pub reads: u64,
    pub writes: u64,
}

impl DataIO {
    pub fn total(&self) -> u64 {
        self.reads + self.writes
    }
}

impl Add for DataIO {
    type Output = DataIO;

    fn add(self, rhs: DataIO) -> DataIO {
        DataIO { reads: self.reads + rhs.reads, writes: self.writes + rhs.writes }
    }
}

/// Summed per-point traffic of the given stages in `d` dimensions.
pub fn io_model(d: usize, stages: &[Stage]) -> Result<DataIO, IoError> {
    let nv = equations::n_vars(d)? as u64;
    let d = d as u64;
    Ok(stages
        .iter()
        .map(|s| match s {
            Stage::Stage2 => DataIO { reads: nv, writes: d * nv },
            Stage::Stage3 => DataIO { reads: d * nv, writes: nv },
            // divergence plus the gradient subset of the solution
            Stage::Stage6 => DataIO { reads: nv + d * d, writes: nv },
            Stage::Fused23 | Stage::Fused236 => DataIO { reads: nv, writes: nv },
        })
        .fold(DataIO::default(), Add::add))
}

/// `old.total() / new.total()`.
pub fn speedup_estimate(old: DataIO, new: DataIO) -> Result<f64, IoError> {
    if new.total() == 0 {
        return Err(IoError::ZeroTraffic);
    }
    Ok(old.total() as f64 / new.total() as f64)
}

/// Shared memory needed to hold full elements for a block,
/// `N_t n_v m^d / N_et` words.
pub fn shared_bytes_full_element(
    threads: usize,
    m: usize,
    threads_per_element: usize,
    d: usize,
    precision: Precision,
) -> Result<usize, IoError> {
    let nv = equations::n_vars(d)?;
    if threads_per_element == 0 || threads % threads_per_element != 0 {
        return Err(IoError::NonDivisible { threads, per_element: threads_per_element });
    }
    Ok(threads / threads_per_element * nv * m.pow(d as u32) * precision.word_bytes())
}

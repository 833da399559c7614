//! Flux-reconstruction reference machinery: element configuration, 1D
//! operators, state fields, the un-fused reference divergence and the data
//! I/O model.

mod field;
mod io_model;
mod operators;
mod oracle;
mod tgv;

pub use field::{FieldError, FieldSidecar, StateField, SOA_WIDTH};
pub use io_model::{io_model, shared_bytes_full_element, speedup_estimate, DataIO, IoError, Stage};
pub use operators::{
    derivative_matrix, gauss_legendre_points, unique_constants, ConstTable, OperatorError,
    OperatorMatrix,
};
pub use oracle::{oracle_divergence, oracle_divergence_with_scale, OracleError};
pub use tgv::{tgv_point, tgv_state, TgvMesh};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fp32,
    Fp64,
}

impl Precision {
    pub const fn word_bytes(self) -> usize {
        match self {
            Precision::Fp32 => 4,
            Precision::Fp64 => 8,
        }
    }

    pub const fn c_type(self) -> &'static str {
        match self {
            Precision::Fp32 => "float",
            Precision::Fp64 => "double",
        }
    }

    /// Round a value to this precision and back.
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::Fp32 => x as f32 as f64,
            Precision::Fp64 => x,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Fp32 => "fp32",
            Precision::Fp64 => "fp64",
        })
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" | "f32" | "single" => Ok(Precision::Fp32),
            "fp64" | "f64" | "double" => Ok(Precision::Fp64),
            other => Err(format!("unknown precision `{other}`")),
        }
    }
}

/// Shape of the problem a kernel is generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementConfig {
    /// Polynomial order; `m = p + 1` points per line.
    pub p: usize,
    pub d: usize,
    pub n_elem: usize,
    pub block_threads: usize,
    pub precision: Precision,
}

impl ElementConfig {
    pub fn new(p: usize, n_elem: usize, block_threads: usize, precision: Precision) -> Self {
        Self { p, d: 3, n_elem, block_threads, precision }
    }

    pub const fn m(&self) -> usize {
        self.p + 1
    }

    /// Solution points per element, `m^d`.
    pub fn n_s(&self) -> usize {
        self.m().pow(self.d as u32)
    }

    pub fn n_vars(&self) -> usize {
        1 + self.d + self.d * self.d
    }

    /// Elements per block for the lines method (`block_threads = n m^2`),
    /// or `None` when the block size is not a multiple of `m^2`.
    pub fn lines_elements_per_block(&self) -> Option<usize> {
        let per = self.m() * self.m();
        (self.block_threads % per == 0 && self.block_threads >= per)
            .then_some(self.block_threads / per)
    }
}

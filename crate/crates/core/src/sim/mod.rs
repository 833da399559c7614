//! Lockstep CPU execution of kernel IR over simulated blocks, with race
//! detection, transaction accounting and a latency-weighted cost model.

mod exec;
mod race;
mod verify;

pub use race::{detect_races, RaceDetector, RaceFlag, SharedAccess};
pub use verify::{max_relative_error, tgv_fixture, verify, verify_with, TrialResult, Verdict, VerifyConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{KernelIR, MAX_SHARED_BYTES};
use crate::equations::PhysParams;
use crate::fr::{io_model, Precision, Stage, StateField};

pub const WARP_SIZE: usize = 32;

/// Latency of an L2 hit, in warp cycles.
pub const GLOBAL_CYCLES: u64 = 193;
/// Conflict-free shared access.
pub const SHARED_CYCLES: u64 = 19;
pub const FMA_CYCLES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Global,
    Shared,
    Constant,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("instruction {instr}: {space:?} access out of bounds at word {addr}")]
    OutOfBounds { instr: usize, space: Space, addr: i64 },
    #[error("instruction {instr}: warps disagree on the barrier to wait at")]
    BarrierDivergence { instr: usize },
    #[error("instruction {instr}: {reason}")]
    Malformed { instr: usize, reason: String },
    #[error("invalid grid: {0}")]
    Grid(String),
}

/// Runtime arguments of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub phys: PhysParams,
    pub jac: [f64; 3],
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { phys: PhysParams::default(), jac: [1.0; 3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimGrid {
    pub blocks: usize,
    pub threads_per_block: usize,
    pub warp_size: usize,
    pub shared_bytes: usize,
    pub n_elem: usize,
}

impl SimGrid {
    /// Launch shape covering `n_elem` elements with `ir`.
    pub fn for_kernel(ir: &KernelIR, n_elem: usize) -> Self {
        Self {
            blocks: n_elem.div_ceil(ir.meta.elements_per_block.max(1)),
            threads_per_block: ir.meta.cfg.block_threads,
            warp_size: WARP_SIZE,
            shared_bytes: ir.meta.shared_bytes,
            n_elem,
        }
    }

    fn validate(&self, ir: &KernelIR) -> Result<(), SimError> {
        let bad = |s: String| Err(SimError::Grid(s));
        if self.warp_size != WARP_SIZE {
            return bad(format!("warp size must be {WARP_SIZE}"));
        }
        if self.threads_per_block == 0 || self.threads_per_block > 1024 {
            return bad(format!("{} threads per block", self.threads_per_block));
        }
        if self.shared_bytes > MAX_SHARED_BYTES {
            return bad(format!("{} bytes of shared memory", self.shared_bytes));
        }
        if self.shared_bytes < ir.meta.shared_bytes {
            return bad(format!("kernel needs {} bytes of shared memory", ir.meta.shared_bytes));
        }
        if self.threads_per_block != ir.meta.cfg.block_threads {
            return bad(format!("kernel is built for {} threads", ir.meta.cfg.block_threads));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Lane-level word loads, repeats included.
    pub global_read_words: u64,
    /// Distinct input words read at least once.
    pub global_read_distinct_words: u64,
    pub global_read_sectors: u64,
    pub global_write_words: u64,
    pub global_write_sectors: u64,
    pub shared_read_words: u64,
    pub shared_write_words: u64,
    pub shared_transactions: u64,
    pub bank_conflict_extra_transactions: u64,
    /// Warp-level arithmetic issues.
    pub arithmetic_issues: u64,
    pub race_count: usize,
    pub race_flags: Vec<RaceFlag>,
    pub modeled_cycles: u64,
    pub modeled_speedup_vs_unfused: f64,
    /// Un-fused model traffic over counted distinct traffic.
    pub io_ratio: f64,
}

impl SimReport {
    pub fn global_transactions(&self) -> u64 {
        self.global_read_sectors + self.global_write_sectors
    }

    pub fn conflict_fraction(&self) -> f64 {
        if self.shared_transactions == 0 {
            0.0
        } else {
            self.bank_conflict_extra_transactions as f64 / self.shared_transactions as f64
        }
    }
}

/// Latency-weighted count: a ranking heuristic, not a runtime prediction.
pub fn modeled_cycles(global_transactions: u64, shared_transactions: u64, arithmetic_issues: u64) -> u64 {
    GLOBAL_CYCLES * global_transactions + SHARED_CYCLES * shared_transactions + FMA_CYCLES * arithmetic_issues
}

fn unfused_stages(with_source: bool) -> Vec<Stage> {
    let mut s = vec![Stage::Stage2, Stage::Stage3];
    if with_source {
        s.push(Stage::Stage6);
    }
    s
}

/// Words an un-fused pipeline moves for `n_elem` elements.
pub fn unfused_words(ir: &KernelIR, n_elem: usize) -> u64 {
    let io = io_model(3, &unfused_stages(ir.meta.opts.fuse_source)).expect("three dimensions");
    io.total() * (ir.meta.cfg.n_s() * n_elem) as u64
}

/// Cycles of the un-fused pipeline doing the same arithmetic and shared work,
/// with perfectly coalesced traffic.
pub fn unfused_cycles(ir: &KernelIR, n_elem: usize, report: &SimReport) -> u64 {
    let sectors = (unfused_words(ir, n_elem) * ir.meta.cfg.precision.word_bytes() as u64).div_ceil(32);
    modeled_cycles(sectors, report.shared_transactions, report.arithmetic_issues)
}

fn finish_report(ir: &KernelIR, n_elem: usize, report: &mut SimReport) {
    report.modeled_cycles =
        modeled_cycles(report.global_transactions(), report.shared_transactions, report.arithmetic_issues);
    let unfused = unfused_cycles(ir, n_elem, report);
    report.modeled_speedup_vs_unfused =
        if report.modeled_cycles == 0 { 0.0 } else { unfused as f64 / report.modeled_cycles as f64 };
    let counted = report.global_read_distinct_words + report.global_write_words;
    report.io_ratio = if counted == 0 { 0.0 } else { unfused_words(ir, n_elem) as f64 / counted as f64 };
}

/// Runs `ir` over `grid` on `inputs`, returning a fresh output field.
pub fn execute(
    ir: &KernelIR,
    inputs: &StateField,
    grid: &SimGrid,
    params: &KernelParams,
) -> Result<(StateField, SimReport), SimError> {
    grid.validate(ir)?;
    let cfg = &ir.meta.cfg;
    if inputs.p() != cfg.p || inputs.d() != cfg.d || inputs.n_elem() != grid.n_elem {
        return Err(SimError::Grid(format!(
            "input field is p = {}, d = {}, {} elements",
            inputs.p(),
            inputs.d(),
            inputs.n_elem()
        )));
    }
    let (out, mut report) = match cfg.precision {
        Precision::Fp32 => run_typed::<f32>(ir, inputs, grid, params)?,
        Precision::Fp64 => run_typed::<f64>(ir, inputs, grid, params)?,
    };
    finish_report(ir, grid.n_elem, &mut report);
    Ok((out, report))
}

fn run_typed<T: num_traits::Float>(
    ir: &KernelIR,
    inputs: &StateField,
    grid: &SimGrid,
    params: &KernelParams,
) -> Result<(StateField, SimReport), SimError> {
    let input: Vec<T> = inputs.as_slice().iter().map(|&x| T::from(x).expect("finite input")).collect();
    let mut output = vec![T::zero(); input.len()];
    let report = exec::run_grid(ir, grid, params, &input, &mut output)?;
    let mut out = StateField::zeros(inputs.p(), inputs.d(), inputs.n_elem());
    for (o, x) in out.as_mut_slice().iter_mut().zip(&output) {
        *o = x.to_f64().expect("finite output");
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_model_latencies() {
        assert_eq!(modeled_cycles(1, 0, 0), 193);
        assert_eq!(modeled_cycles(0, 1, 1), 23);
        assert_eq!(modeled_cycles(0, 0, 0), 0);
    }
}

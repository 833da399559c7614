//! Kernel IR, the planar and lines generators, the scheduling and hint
//! passes, and the CUDA-dialect renderer.

mod builder;
mod graph;
mod ir;
mod lines;
mod options;
mod passes;
mod planar;
mod render;

pub use graph::{build_dependency_graph, DependencyGraph, EdgeKind};
pub use ir::{
    register_pressure, Addr, Base, Category, ConstMode, Guard, IndexExpr, Instr, IrMetrics, KernelIR,
    KernelMeta, Limit, LoadHint, LoopId, Operand, Param, Reg, StoreHint, IR_VERSION,
};
pub use lines::{generate_lines, lines_block_for, lines_footprint};
pub use options::{Agglomerate, LinesVars, Method, OptionSet, OPTION_CASES};
pub use passes::{
    apply_hints, block_structure, pass_agglomerate, pass_agglomerate_with, pass_apply_hints,
    pass_interleave_asap,
};
pub use planar::{generate_planar, generate_planar_managed, generate_planar_managed_traced, planar_max_smem, planar_min_smem};
pub use render::render_source;

use thiserror::Error;

use crate::fr::ElementConfig;
use crate::memory::{LayoutError, ManagerError};

/// Largest shared allocation a block may use.
pub const MAX_SHARED_BYTES: usize = 96 * 1024;

#[derive(Debug, Error, PartialEq)]
pub enum CodegenError {
    #[error("only three-dimensional elements are supported, got d = {0}")]
    Dimension(usize),
    #[error("polynomial order {0} is outside 1..=6")]
    Order(usize),
    #[error("invalid block size {threads}: {reason}")]
    Block { threads: usize, reason: String },
    #[error("shared memory needs {needed} bytes, {available} available")]
    SharedTooSmall { needed: usize, available: usize },
    #[error("invalid options: {0}")]
    Options(String),
    #[error("layout: {0}")]
    Layout(#[from] LayoutError),
    #[error("memory manager: {0}")]
    Manager(#[from] ManagerError),
    #[error("malformed IR JSON: {0}")]
    Json(String),
    #[error("unsupported IR version {0}")]
    Version(u32),
}

pub(crate) fn check_config(cfg: &ElementConfig) -> Result<(), CodegenError> {
    if cfg.d != 3 {
        return Err(CodegenError::Dimension(cfg.d));
    }
    if !(1..=6).contains(&cfg.p) {
        return Err(CodegenError::Order(cfg.p));
    }
    if cfg.block_threads == 0 || cfg.block_threads > 1024 {
        return Err(CodegenError::Block { threads: cfg.block_threads, reason: "must be in 1..=1024".into() });
    }
    Ok(())
}

/// Generates the kernel for `method` and applies the scheduling and hint
/// passes selected in `opts`.
pub fn generate(cfg: &ElementConfig, method: Method, opts: &OptionSet) -> Result<KernelIR, CodegenError> {
    opts.validate()?;
    let ir = match method {
        Method::PlanarUnmanaged => generate_planar(cfg, opts)?,
        Method::PlanarManaged { smem_bytes } => generate_planar_managed(cfg, opts, smem_bytes)?,
        Method::Lines { vars } => generate_lines(cfg, vars, opts)?,
    };
    Ok(schedule(ir, opts))
}

/// Applies the passes `opts` asks for to an already generated kernel.
pub fn schedule(mut ir: KernelIR, opts: &OptionSet) -> KernelIR {
    if opts.interleave_asap {
        ir = pass_interleave_asap(&ir);
    }
    if let Some(a) = opts.agglomerate {
        ir = pass_agglomerate_with(&ir, a.min_block, a.max_block);
    }
    apply_hints(&mut ir, opts.load_hints, opts.store_hints);
    ir
}

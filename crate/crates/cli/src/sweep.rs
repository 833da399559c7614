use acmhd_fuse::codegen::{
    generate, lines_footprint, planar_max_smem, planar_min_smem, KernelIR, LinesVars, Method, OptionSet,
    MAX_SHARED_BYTES, OPTION_CASES,
};
use acmhd_fuse::fr::ElementConfig;
use acmhd_fuse::sim::{verify_with, Verdict, VerifyConfig};
use anyhow::{bail, Result};
use clap::ValueEnum;
use serde::Serialize;

use crate::Resolved;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Smem,
    Block,
    #[value(name = "var_config", alias = "var-config")]
    VarConfig,
    #[value(name = "opts-case", alias = "opts_case")]
    OptsCase,
}

/// One sweep row; the column order is the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub axis: String,
    pub value: String,
    pub method: String,
    pub p: usize,
    pub precision: String,
    pub block_threads: usize,
    pub smem_bytes: usize,
    pub options: String,
    pub verdict: String,
    pub max_rel_error: f64,
    pub races: usize,
    pub global_read_words: u64,
    pub global_read_distinct_words: u64,
    pub global_write_words: u64,
    pub global_transactions: u64,
    pub shared_read_words: u64,
    pub shared_write_words: u64,
    pub shared_transactions: u64,
    pub bank_conflict_extra: u64,
    pub arithmetic_issues: u64,
    pub modeled_cycles: u64,
    pub modeled_speedup: f64,
    pub io_ratio: f64,
    pub register_pressure: usize,
}

pub fn row(ir: &KernelIR, axis: &str, value: &str, v: &Verdict) -> Row {
    let r = v.report.clone().unwrap_or_default();
    Row {
        axis: axis.into(),
        value: value.into(),
        method: ir.meta.method.to_string(),
        p: ir.meta.cfg.p,
        precision: ir.meta.cfg.precision.to_string(),
        block_threads: ir.meta.cfg.block_threads,
        smem_bytes: ir.meta.shared_bytes,
        options: ir.meta.opts.to_list(),
        verdict: if v.pass { "PASS" } else { "FAIL" }.into(),
        max_rel_error: v.max_rel_error,
        races: v.race_count,
        global_read_words: r.global_read_words,
        global_read_distinct_words: r.global_read_distinct_words,
        global_write_words: r.global_write_words,
        global_transactions: r.global_transactions(),
        shared_read_words: r.shared_read_words,
        shared_write_words: r.shared_write_words,
        shared_transactions: r.shared_transactions,
        bank_conflict_extra: r.bank_conflict_extra_transactions,
        arithmetic_issues: r.arithmetic_issues,
        modeled_cycles: r.modeled_cycles,
        modeled_speedup: r.modeled_speedup_vs_unfused,
        io_ratio: r.io_ratio,
        register_pressure: ir.metrics().register_pressure,
    }
}

/// Configurations along `axis`, as (axis value, config, method, options).
fn configurations(
    axis: Axis,
    base: &Resolved,
    block_limit: Option<usize>,
) -> Result<Vec<(String, ElementConfig, Method, OptionSet)>> {
    let cfg = base.cfg;
    let m2 = cfg.m() * cfg.m();
    let with_block = |t: usize| ElementConfig { block_threads: t, ..cfg };
    let mut out = Vec::new();
    match axis {
        Axis::Smem => match base.method {
            Method::PlanarManaged { .. } => {
                let slot = cfg.block_threads * cfg.precision.word_bytes();
                let mut s = planar_min_smem(&cfg);
                while s <= planar_max_smem(&cfg) {
                    out.push((s.to_string(), cfg, Method::PlanarManaged { smem_bytes: s }, base.opts));
                    s += slot;
                }
            }
            Method::Lines { vars } => {
                for n in 1..=1024 / m2 {
                    let c = with_block(n * m2);
                    match lines_footprint(&c, vars) {
                        Some(b) if b <= MAX_SHARED_BYTES => out.push((b.to_string(), c, base.method, base.opts)),
                        _ => break,
                    }
                }
            }
            Method::PlanarUnmanaged => bail!("the unmanaged planar kernel has a fixed shared footprint"),
        },
        Axis::Block => match base.method {
            Method::Lines { vars } => {
                for n in 1..=1024 / m2 {
                    let c = with_block(n * m2);
                    if lines_footprint(&c, vars).is_some_and(|b| b <= MAX_SHARED_BYTES) {
                        out.push(((n * m2).to_string(), c, base.method, base.opts));
                    }
                }
            }
            method => {
                for t in (32..=1024).step_by(32) {
                    let c = with_block(t);
                    let method = match method {
                        Method::PlanarManaged { .. } => Method::PlanarManaged { smem_bytes: planar_min_smem(&c) },
                        other => other,
                    };
                    out.push((t.to_string(), c, method, base.opts));
                }
            }
        },
        Axis::VarConfig => {
            let limit = block_limit.unwrap_or(256);
            for vars in LinesVars::ALL {
                let t = acmhd_fuse::codegen::lines_block_for(cfg.p, vars, cfg.precision, limit)
                    .ok_or_else(|| anyhow::anyhow!("no lines-{vars} block of at most {limit} threads fits"))?;
                out.push((vars.to_string(), with_block(t), Method::Lines { vars }, base.opts));
            }
        }
        Axis::OptsCase => {
            for case in 0..OPTION_CASES {
                let mut opts = OptionSet::case(case).expect("case in range");
                opts.fuse_source = base.opts.fuse_source;
                out.push((case.to_string(), cfg, base.method, opts));
            }
        }
    }
    Ok(out)
}

/// Generates and verifies every configuration on `axis`; configurations
/// that cannot be generated are skipped.
pub fn run(axis: Axis, base: &Resolved, vc: &VerifyConfig, block_limit: Option<usize>) -> Result<Vec<Row>> {
    let name = axis.to_possible_value().expect("no skipped variants").get_name().to_string();
    let mut rows = Vec::new();
    for (value, cfg, method, opts) in configurations(axis, base, block_limit)? {
        let Ok(ir) = generate(&cfg, method, &opts) else { continue };
        let v = verify_with(&ir, vc);
        rows.push(row(&ir, &name, &value, &v));
    }
    Ok(rows)
}

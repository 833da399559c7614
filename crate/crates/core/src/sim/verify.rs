use serde::{Deserialize, Serialize};

use super::{execute, KernelParams, RaceFlag, SimGrid, SimReport};
use crate::codegen::KernelIR;
use crate::equations::PhysParams;
use crate::fr::{gauss_legendre_points, oracle_divergence_with_scale, tgv_state, OperatorMatrix, Precision, StateField, TgvMesh};

pub const TGV_MESH: TgvMesh = TgvMesh { nx: 8, ny: 8, nz: 4 };
pub const TGV_MACH: f64 = 0.08;
pub const TGV_GAMMA: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    /// Elements in each random field.
    pub n_elem: usize,
    pub phys: PhysParams,
    pub include_tgv: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { trials: 10, seed: 0, n_elem: 256, phys: PhysParams::default(), include_tgv: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub name: String,
    pub n_elem: usize,
    pub max_rel_error: f64,
    pub race_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub race_count: usize,
    pub race_flags: Vec<RaceFlag>,
    pub trials: Vec<TrialResult>,
    /// Counts from the first trial.
    pub report: Option<SimReport>,
    /// Execution failure, if any.
    pub error: Option<String>,
}

pub fn tolerance(precision: Precision) -> f64 {
    match precision {
        Precision::Fp32 => 1e-5,
        Precision::Fp64 => 1e-11,
    }
}

/// Largest `|sim - oracle| / scale` over every value of the field.
pub fn max_relative_error(sim: &StateField, oracle: &StateField, scale: &StateField) -> f64 {
    let mut worst: f64 = 0.0;
    for e in 0..oracle.n_elem() {
        for pt in 0..oracle.n_s() {
            for v in 0..oracle.n_vars() {
                let s = scale.get(e, pt, v).max(f64::MIN_POSITIVE);
                let err = (sim.get(e, pt, v) - oracle.get(e, pt, v)).abs() / s;
                worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
            }
        }
    }
    worst
}

/// Vortex field on the fixed mesh and its Jacobian.
pub fn tgv_fixture(p: usize) -> (StateField, [f64; 3]) {
    let nodes = gauss_legendre_points(p + 1).expect("order in range");
    (tgv_state(&TGV_MESH, &nodes, TGV_MACH, TGV_GAMMA), TGV_MESH.jacobian())
}

/// Checks `ir` against the reference on `trials` random fields and the
/// vortex fixture.
pub fn verify(ir: &KernelIR, phys: &PhysParams, trials: usize, seed: u64) -> Verdict {
    verify_with(ir, &VerifyConfig { trials, seed, n_elem: ir.meta.cfg.n_elem, phys: *phys, include_tgv: true })
}

pub fn verify_with(ir: &KernelIR, vc: &VerifyConfig) -> Verdict {
    let cfg = &ir.meta.cfg;
    let tol = tolerance(cfg.precision);
    let mut v = Verdict {
        pass: false,
        tolerance: tol,
        max_rel_error: 0.0,
        race_count: 0,
        race_flags: Vec::new(),
        trials: Vec::new(),
        report: None,
        error: None,
    };
    let op = match OperatorMatrix::gauss_legendre(cfg.p) {
        Ok(op) => op,
        Err(e) => {
            v.error = Some(e.to_string());
            return v;
        }
    };
    let mut cases: Vec<(String, StateField, [f64; 3])> = (0..vc.trials)
        .map(|t| {
            let seed = vc.seed.wrapping_add(t as u64);
            (format!("random-{seed}"), StateField::random(cfg.p, 3, vc.n_elem, seed), [1.0; 3])
        })
        .collect();
    if vc.include_tgv {
        let (f, jac) = tgv_fixture(cfg.p);
        cases.push(("tgv".into(), f, jac));
    }
    for (name, field, jac) in cases {
        let input = field.rounded(cfg.precision);
        let params = KernelParams { phys: vc.phys, jac };
        let grid = SimGrid::for_kernel(ir, input.n_elem());
        let (out, report) = match execute(ir, &input, &grid, &params) {
            Ok(r) => r,
            Err(e) => {
                v.error = Some(format!("{name}: {e}"));
                v.max_rel_error = f64::INFINITY;
                return v;
            }
        };
        let (oracle, scale) = oracle_divergence_with_scale(&input, &op, &vc.phys, &jac, ir.meta.opts.fuse_source)
            .expect("field and operator agree");
        let err = max_relative_error(&out, &oracle, &scale);
        v.max_rel_error = v.max_rel_error.max(err);
        v.race_count += report.race_count;
        for f in &report.race_flags {
            if v.race_flags.len() < 16 && !v.race_flags.contains(f) {
                v.race_flags.push(*f);
            }
        }
        v.trials.push(TrialResult { name, n_elem: input.n_elem(), max_rel_error: err, race_count: report.race_count });
        if v.report.is_none() {
            v.report = Some(report);
        }
    }
    v.pass = v.max_rel_error <= tol && v.race_count == 0;
    v
}

//! Pointwise physics of the artificial-compressibility system with
//! hyperbolised diffusion (ACM-HD).
//!
//! The solved variables are ordered `P, V, q, r, s`: pressure, the `d`
//! velocity components, then the gradient rows of `u`, `v` and `w` (each of
//! length `d`). Every other module indexes against this ordering.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EquationError {
    #[error("unsupported dimension {0}, expected 2 or 3")]
    Dimension(usize),
    #[error("state has {got} values, expected {expected} for d={d}")]
    StateLength { d: usize, got: usize, expected: usize },
    #[error("invalid physical parameters: {0}")]
    Params(&'static str),
    #[error("direction must have unit length (|n| = {0})")]
    Direction(f64),
    #[error("eigenvalue solver did not converge for sample {0}")]
    EigenSolver(usize),
}

/// Number of solved variables, `1 + d + d^2`.
pub fn n_vars(d: usize) -> Result<usize, EquationError> {
    check_dim(d)?;
    Ok(1 + d + d * d)
}

fn check_dim(d: usize) -> Result<(), EquationError> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(EquationError::Dimension(d))
    }
}

/// Index of velocity component `b` in the state vector.
#[inline]
pub const fn vel(b: usize) -> usize {
    1 + b
}

/// Index of the gradient variable `d(V_b)/dx_c` in the state vector.
#[inline]
pub const fn grad(d: usize, b: usize, c: usize) -> usize {
    1 + d + d * b + c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Kinematic viscosity.
    pub nu: f64,
    /// Artificial-compressibility parameter.
    pub zeta: f64,
    /// Hyperbolic relaxation time.
    #[serde(rename = "T")]
    pub t_relax: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self { nu: 1.0 / 1600.0, zeta: 2.5, t_relax: 1.0 }
    }
}

impl PhysParams {
    pub fn new(nu: f64, zeta: f64, t_relax: f64) -> Result<Self, EquationError> {
        let p = Self { nu, zeta, t_relax };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EquationError> {
        if !(self.nu >= 0.0) {
            return Err(EquationError::Params("nu must be >= 0"));
        }
        if !(self.zeta > 0.0) {
            return Err(EquationError::Params("zeta must be > 0"));
        }
        if !(self.t_relax > 0.0) {
            return Err(EquationError::Params("T must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcmHdState {
    d: usize,
    values: Vec<f64>,
}

impl AcmHdState {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self, EquationError> {
        let expected = n_vars(d)?;
        if values.len() != expected {
            return Err(EquationError::StateLength { d, got: values.len(), expected });
        }
        Ok(Self { d, values })
    }

    pub fn zeros(d: usize) -> Result<Self, EquationError> {
        Ok(Self { d, values: vec![0.0; n_vars(d)?] })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn pressure(&self) -> f64 {
        self.values[0]
    }

    pub fn velocity(&self, b: usize) -> f64 {
        self.values[vel(b)]
    }

    /// `d(V_b)/dx_c`
    pub fn gradient(&self, b: usize, c: usize) -> f64 {
        self.values[grad(self.d, b, c)]
    }
}

/// Flux tensor stored column-wise: `columns[a][v]` is the flux of variable
/// `v` in direction `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxTensor {
    pub columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceVector(pub Vec<f64>);

/// Flux of every variable in direction `a`.
pub fn flux_column(state: &AcmHdState, params: &PhysParams, a: usize) -> Vec<f64> {
    let d = state.d;
    let mut col = vec![0.0; state.values.len()];
    let va = state.velocity(a);
    let p = state.pressure();
    col[0] = params.zeta * va;
    for b in 0..d {
        let vb = state.velocity(b);
        let diag = if b == a { p } else { 0.0 };
        col[vel(b)] = vb * va + diag - params.nu * state.gradient(b, a);
        col[grad(d, b, a)] = -vb / params.t_relax;
    }
    col
}

/// Term-wise magnitudes of [`flux_column`]: each entry is the sum of the
/// absolute values of the terms that make it up.
pub fn flux_column_magnitude(state: &AcmHdState, params: &PhysParams, a: usize) -> Vec<f64> {
    let d = state.d;
    let mut col = vec![0.0; state.values.len()];
    let va = state.velocity(a).abs();
    let p = state.pressure().abs();
    col[0] = params.zeta.abs() * va;
    for b in 0..d {
        let vb = state.velocity(b).abs();
        let diag = if b == a { p } else { 0.0 };
        col[vel(b)] = vb * va + diag + (params.nu * state.gradient(b, a)).abs();
        col[grad(d, b, a)] = vb / params.t_relax;
    }
    col
}

pub fn flux(state: &AcmHdState, params: &PhysParams) -> FluxTensor {
    FluxTensor { columns: (0..state.d).map(|a| flux_column(state, params, a)).collect() }
}

pub fn source(state: &AcmHdState, params: &PhysParams) -> SourceVector {
    let d = state.d;
    let mut out = vec![0.0; state.values.len()];
    for b in 0..d {
        for c in 0..d {
            let g = grad(d, b, c);
            out[g] = -state.values[g] / params.t_relax;
        }
    }
    SourceVector(out)
}

/// Structural zero pattern of the flux: `pattern[a][v]` is true when the
/// flux of `v` in direction `a` can be nonzero.
pub fn flux_pattern(d: usize) -> Result<Vec<Vec<bool>>, EquationError> {
    let nv = n_vars(d)?;
    let mut pattern = vec![vec![false; nv]; d];
    for (a, col) in pattern.iter_mut().enumerate() {
        col[0] = true;
        for b in 0..d {
            col[vel(b)] = true;
            col[grad(d, b, a)] = true;
        }
    }
    Ok(pattern)
}

/// Sparsity of the flux function as an exact fraction `(num, den)`,
/// `1 - (1 + 2d) / (1 + d + d^2)`.
pub fn sparsity(d: usize) -> Result<(usize, usize), EquationError> {
    let nv = n_vars(d)?;
    let nonzero = 1 + 2 * d;
    let num = nv - nonzero;
    let g = gcd(num, nv);
    Ok((num / g, nv / g))
}

pub fn sparsity_f64(d: usize) -> Result<f64, EquationError> {
    let (n, m) = sparsity(d)?;
    Ok(n as f64 / m as f64)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Analytic Jacobian of `sum_a n_a F_a` with respect to the state.
pub fn directional_jacobian(
    state: &AcmHdState,
    params: &PhysParams,
    direction: &[f64],
) -> DMatrix<f64> {
    let d = state.d;
    let nv = state.values.len();
    let mut jac = DMatrix::zeros(nv, nv);
    let inv_t = 1.0 / params.t_relax;
    for (a, &na) in direction.iter().enumerate() {
        if na == 0.0 {
            continue;
        }
        let va = state.velocity(a);
        // continuity: zeta * V_a
        jac[(0, vel(a))] += na * params.zeta;
        for b in 0..d {
            let row = vel(b);
            let vb = state.velocity(b);
            // momentum: V_b V_a + P delta_ab - nu G_ba
            jac[(row, vel(b))] += na * va;
            jac[(row, vel(a))] += na * vb;
            if a == b {
                jac[(row, 0)] += na;
            }
            jac[(row, grad(d, b, a))] -= na * params.nu;
            // gradient equation: -V_b / T in slot (b, a)
            jac[(grad(d, b, a), vel(b))] -= na * inv_t;
        }
    }
    jac
}

fn orthogonal_mixer(n: usize) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicityReport {
    pub max_imag: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

pub const HYPERBOLICITY_TOL: f64 = 1e-8;

/// Checks that the directional flux Jacobian has a real spectrum at every
/// sample state.
pub fn hyperbolicity_check(
    params: &PhysParams,
    direction: &[f64],
    states: &[AcmHdState],
) -> Result<HyperbolicityReport, EquationError> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(EquationError::Direction(norm));
    }
    let mut max_imag = 0.0f64;
    let mixer = orthogonal_mixer(direction.len() * direction.len() + direction.len() + 1);
    for (idx, s) in states.iter().enumerate() {
        if direction.len() != s.d {
            return Err(EquationError::StateLength {
                d: direction.len(),
                got: s.values.len(),
                expected: n_vars(direction.len())?,
            });
        }
        let jac = directional_jacobian(s, params, direction);
        // an orthogonal similarity leaves the spectrum unchanged and breaks the
        // exact zero structure that stalls unshifted QR sweeps
        let mixed = mixer.transpose() * jac * &mixer;
        let schur = nalgebra::linalg::Schur::try_new(mixed, 1e-14, 100_000)
            .ok_or(EquationError::EigenSolver(idx))?;
        for ev in schur.complex_eigenvalues().iter() {
            max_imag = max_imag.max(ev.im.abs());
        }
    }
    Ok(HyperbolicityReport {
        max_imag,
        tolerance: HYPERBOLICITY_TOL,
        samples: states.len(),
        passed: max_imag < HYPERBOLICITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(d: usize, rng: &mut impl Rng) -> AcmHdState {
        let nv = n_vars(d).unwrap();
        AcmHdState::new(d, (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Literal transcription of the 3D flux bracket, one entry at a time.
    fn transcribed_flux_3d(s: &[f64], p: &PhysParams) -> [[f64; 13]; 3] {
        let (pr, u, v, w) = (s[0], s[1], s[2], s[3]);
        let (qx, qy, qz) = (s[4], s[5], s[6]);
        let (rx, ry, rz) = (s[7], s[8], s[9]);
        let (sx, sy, sz) = (s[10], s[11], s[12]);
        let (nu, ze, t) = (p.nu, p.zeta, p.t_relax);
        [
            [
                ze * u,
                u * u + pr - nu * qx,
                u * v - nu * rx,
                u * w - nu * sx,
                -u / t, 0.0, 0.0,
                -v / t, 0.0, 0.0,
                -w / t, 0.0, 0.0,
            ],
            [
                ze * v,
                u * v - nu * qy,
                v * v + pr - nu * ry,
                v * w - nu * sy,
                0.0, -u / t, 0.0,
                0.0, -v / t, 0.0,
                0.0, -w / t, 0.0,
            ],
            [
                ze * w,
                u * w - nu * qz,
                v * w - nu * rz,
                w * w + pr - nu * sz,
                0.0, 0.0, -u / t,
                0.0, 0.0, -v / t,
                0.0, 0.0, -w / t,
            ],
        ]
    }

    #[test]
    fn variable_counts() {
        assert_eq!(n_vars(3), Ok(13));
        assert_eq!(n_vars(2), Ok(7));
        assert_eq!(n_vars(1), Err(EquationError::Dimension(1)));
    }

    #[test]
    fn zero_state_has_zero_flux() {
        for d in [2, 3] {
            let s = AcmHdState::zeros(d).unwrap();
            let f = flux(&s, &PhysParams::default());
            assert!(f.columns.iter().flatten().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn pressure_only_2d() {
        let mut vals = vec![0.0; 7];
        vals[0] = 1.0;
        let s = AcmHdState::new(2, vals).unwrap();
        let f = flux(&s, &PhysParams::default());
        assert_eq!(f.columns[0], vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.columns[1], vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn flux_2d_matches_transcription() {
        let p = PhysParams::new(0.3, 1.7, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = random_state(2, &mut rng);
            let [pr, u, v, qx, qy, rx, ry] = <[f64; 7]>::try_from(s.values()).unwrap();
            let (nu, ze, t) = (p.nu, p.zeta, p.t_relax);
            let fx = [ze * u, u * u + pr - nu * qx, u * v - nu * rx, -u / t, 0.0, -v / t, 0.0];
            let fy = [ze * v, u * v - nu * qy, v * v + pr - nu * ry, 0.0, -u / t, 0.0, -v / t];
            let f = flux(&s, &p);
            assert_eq!(f.columns[0], fx.to_vec());
            assert_eq!(f.columns[1], fy.to_vec());
        }
    }

    #[test]
    fn flux_3d_matches_transcription() {
        let p = PhysParams::new(0.25, 2.5, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let s = random_state(3, &mut rng);
            let want = transcribed_flux_3d(s.values(), &p);
            let f = flux(&s, &p);
            for a in 0..3 {
                for v in 0..13 {
                    assert_eq!(f.columns[a][v], want[a][v], "a={a} v={v}");
                    // zero pattern is state independent
                    let pat = flux_pattern(3).unwrap();
                    if !pat[a][v] {
                        assert_eq!(f.columns[a][v], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn source_examples() {
        let s = AcmHdState::zeros(3).unwrap();
        assert!(source(&s, &PhysParams::default()).0.iter().all(|&x| x == 0.0));

        let mut vals = vec![0.0; 13];
        vals[4] = 1.0;
        vals[5] = 2.0;
        vals[6] = 3.0;
        let s = AcmHdState::new(3, vals).unwrap();
        let p = PhysParams::new(0.0, 2.5, 1.0).unwrap();
        let src = source(&s, &p).0;
        assert_eq!(&src[4..7], &[-1.0, -2.0, -3.0]);
        assert!(src[..4].iter().chain(&src[7..]).all(|&x| x == 0.0));

        let mut vals = vec![0.0; 7];
        vals[3] = 4.0;
        let s = AcmHdState::new(2, vals).unwrap();
        let p = PhysParams::new(0.0, 2.5, 0.5).unwrap();
        assert_eq!(source(&s, &p).0[3], -8.0);
    }

    #[test]
    fn source_is_linear_in_gradients() {
        let p = PhysParams::new(0.1, 2.5, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3] {
            for _ in 0..50 {
                let a = random_state(d, &mut rng);
                let b = random_state(d, &mut rng);
                let alpha: f64 = rng.gen_range(-2.0..2.0);
                let sum: Vec<f64> =
                    a.values().iter().zip(b.values()).map(|(x, y)| x + alpha * y).collect();
                let sab = source(&AcmHdState::new(d, sum).unwrap(), &p).0;
                let sa = source(&a, &p).0;
                let sb = source(&b, &p).0;
                for i in 0..sab.len() {
                    assert!((sab[i] - (sa[i] + alpha * sb[i])).abs() < 1e-12);
                }
                assert!(sab[..=d].iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn sparsity_values() {
        assert_eq!(sparsity(3), Ok((6, 13)));
        assert_eq!(sparsity(2), Ok((2, 7)));
        assert!((sparsity_f64(3).unwrap() - 0.4615).abs() < 1e-4);
        for d in [2, 3] {
            let nv = n_vars(d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
            let s = random_state(d, &mut rng);
            let f = flux(&s, &PhysParams::new(0.2, 2.5, 0.9).unwrap());
            let nonzero = f.columns.iter().flatten().filter(|x| **x != 0.0).count();
            let (num, den) = sparsity(d).unwrap();
            // s * d * nv + nonzeros == d * nv
            assert_eq!(num * d * nv / den + nonzero, d * nv);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let p = PhysParams::new(0.3, 2.5, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(3, &mut rng);
        let n = [0.6, 0.0, 0.8];
        let jac = directional_jacobian(&s, &p, &n);
        let h = 1e-6;
        let dir_flux = |st: &AcmHdState| -> Vec<f64> {
            let f = flux(st, &p);
            (0..13).map(|v| (0..3).map(|a| n[a] * f.columns[a][v]).sum()).collect()
        };
        for col in 0..13 {
            let mut plus = s.clone();
            plus.values_mut()[col] += h;
            let mut minus = s.clone();
            minus.values_mut()[col] -= h;
            let fp = dir_flux(&plus);
            let fm = dir_flux(&minus);
            for row in 0..13 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!((fd - jac[(row, col)]).abs() < 1e-7, "({row},{col})");
            }
        }
    }

    #[test]
    fn hyperbolic_at_zero_state() {
        let p = PhysParams::new(0.1, 2.5, 1.0).unwrap();
        let r = hyperbolicity_check(&p, &[1.0, 0.0, 0.0], &[AcmHdState::zeros(3).unwrap()])
            .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn hyperbolic_at_random_states() {
        let p = PhysParams::new(0.05, 2.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let states: Vec<_> = (0..20).map(|_| random_state(3, &mut rng)).collect();
        for axis in 0..3 {
            let mut n = [0.0; 3];
            n[axis] = 1.0;
            let r = hyperbolicity_check(&p, &n, &states).unwrap();
            assert!(r.passed, "axis {axis}: {r:?}");
        }
    }

    #[test]
    fn non_unit_direction_rejected() {
        let s = AcmHdState::zeros(3).unwrap();
        let err = hyperbolicity_check(&PhysParams::default(), &[1.0, 1.0, 0.0], &[s]);
        assert!(matches!(err, Err(EquationError::Direction(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(PhysParams::new(-1.0, 2.5, 1.0).is_err());
        assert!(PhysParams::new(0.0, 0.0, 1.0).is_err());
        assert!(PhysParams::new(0.0, 2.5, 0.0).is_err());
    }
}

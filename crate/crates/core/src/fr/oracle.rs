use thiserror::Error;

use super::{OperatorMatrix, StateField};
use crate::equations::{flux_column, flux_column_magnitude, source, AcmHdState, PhysParams};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("operator has {op} points per line, field has {field}")]
    OperatorSize { op: usize, field: usize },
    #[error("expected {expected} Jacobian scalars, got {got}")]
    Jacobian { expected: usize, got: usize },
    #[error("unsupported dimension {0}")]
    Dimension(usize),
}

/// Un-fused reference: flux at every point, then the tensor-product
/// divergence `-sum_a jac[a] sum_l D[i_a][l] F_a(.., l, ..)`, plus the source
/// when `with_source` is set.
pub fn oracle_divergence(
    u: &StateField,
    op: &OperatorMatrix,
    params: &PhysParams,
    jac: &[f64],
    with_source: bool,
) -> Result<StateField, OracleError> {
    Ok(oracle_divergence_with_scale(u, op, params, jac, with_source)?.0)
}

/// As [`oracle_divergence`], also returning per output value the sum of the
/// magnitudes of every term that makes it up, down to the individual flux
/// terms. Dividing an error by this scale gives a relative error that stays
/// meaningful where the sum cancels.
pub fn oracle_divergence_with_scale(
    u: &StateField,
    op: &OperatorMatrix,
    params: &PhysParams,
    jac: &[f64],
    with_source: bool,
) -> Result<(StateField, StateField), OracleError> {
    let (d, m, ns, nv) = (u.d(), u.m(), u.n_s(), u.n_vars());
    if !(d == 2 || d == 3) {
        return Err(OracleError::Dimension(d));
    }
    if op.m() != m {
        return Err(OracleError::OperatorSize { op: op.m(), field: m });
    }
    if jac.len() != d {
        return Err(OracleError::Jacobian { expected: d, got: jac.len() });
    }
    let mut out = StateField::zeros(u.p(), d, u.n_elem());
    let mut scale = StateField::zeros(u.p(), d, u.n_elem());
    let strides: Vec<usize> = (0..d).map(|a| m.pow(a as u32)).collect();
    let mut fluxes = vec![vec![0.0; ns * nv]; d];
    let mut magnitudes = vec![vec![0.0; ns * nv]; d];
    let mut states = Vec::with_capacity(ns);
    for e in 0..u.n_elem() {
        states.clear();
        for pt in 0..ns {
            let vals = (0..nv).map(|v| u.get(e, pt, v)).collect();
            let s = AcmHdState::new(d, vals).expect("field shape matches dimension");
            for a in 0..d {
                fluxes[a][pt * nv..(pt + 1) * nv].copy_from_slice(&flux_column(&s, params, a));
                magnitudes[a][pt * nv..(pt + 1) * nv]
                    .copy_from_slice(&flux_column_magnitude(&s, params, a));
            }
            states.push(s);
        }
        for pt in 0..ns {
            let src = with_source.then(|| source(&states[pt], params).0);
            for v in 0..nv {
                let (mut acc, mut mag) = (0.0, 0.0);
                for a in 0..d {
                    let i_a = (pt / strides[a]) % m;
                    let base = pt - i_a * strides[a];
                    let (mut line, mut line_mag) = (0.0, 0.0);
                    for l in 0..m {
                        let idx = (base + l * strides[a]) * nv + v;
                        line += op.at(i_a, l) * fluxes[a][idx];
                        line_mag += op.at(i_a, l).abs() * magnitudes[a][idx];
                    }
                    acc -= jac[a] * line;
                    mag += jac[a].abs() * line_mag;
                }
                if let Some(src) = &src {
                    acc += src[v];
                    mag += src[v].abs();
                }
                out.set(e, pt, v, acc);
                scale.set(e, pt, v, mag);
            }
        }
    }
    Ok((out, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{grad, vel};

    fn params() -> PhysParams {
        PhysParams::new(0.01, 2.5, 0.7).unwrap()
    }

    /// Applies the full `n_s x n_s` derivative operator of each axis as a
    /// dense matrix built from Kronecker products.
    fn dense_reference(u: &StateField, op: &OperatorMatrix, p: &PhysParams, jac: &[f64]) -> StateField {
        let (d, m, ns, nv) = (u.d(), u.m(), u.n_s(), u.n_vars());
        let eye = |n: usize| {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                a[i * n + i] = 1.0;
            }
            a
        };
        let kron = |a: &[f64], na: usize, b: &[f64], nb: usize| {
            let n = na * nb;
            let mut c = vec![0.0; n * n];
            for (i, j, k, l) in index_quads(na, nb) {
                c[(i * nb + k) * n + j * nb + l] = a[i * na + j] * b[k * nb + l];
            }
            c
        };
        // point index i + j m + k m^2: the x-axis is the fastest, so it is
        // the rightmost Kronecker factor
        let mut ops = Vec::new();
        for a in 0..d {
            let mut mat = vec![1.0];
            let mut n = 1;
            for c in (0..d).rev() {
                let f = if c == a { op.entries.clone() } else { eye(m) };
                mat = kron(&mat, n, &f, m);
                n *= m;
            }
            ops.push(mat);
        }
        let mut out = StateField::zeros(u.p(), d, u.n_elem());
        for e in 0..u.n_elem() {
            let fl: Vec<Vec<Vec<f64>>> = (0..ns)
                .map(|pt| {
                    let s = AcmHdState::new(d, (0..nv).map(|v| u.get(e, pt, v)).collect()).unwrap();
                    (0..d).map(|a| flux_column(&s, p, a)).collect()
                })
                .collect();
            for r in 0..ns {
                for v in 0..nv {
                    let mut acc = 0.0;
                    for a in 0..d {
                        for c in 0..ns {
                            acc -= jac[a] * ops[a][r * ns + c] * fl[c][a][v];
                        }
                    }
                    out.set(e, r, v, acc);
                }
            }
        }
        out
    }

    fn index_quads(na: usize, nb: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
        (0..na).flat_map(move |i| {
            (0..na).flat_map(move |j| (0..nb).flat_map(move |k| (0..nb).map(move |l| (i, j, k, l))))
        })
    }

    #[test]
    fn constant_field_has_zero_divergence() {
        let op = OperatorMatrix::gauss_legendre(3).unwrap();
        let mut u = StateField::zeros(3, 3, 2);
        let vals: Vec<f64> = (0..13).map(|v| 0.1 * v as f64 - 0.4).collect();
        for e in 0..2 {
            for pt in 0..64 {
                for (v, x) in vals.iter().enumerate() {
                    u.set(e, pt, v, *x);
                }
            }
        }
        let p = params();
        let out = oracle_divergence(&u, &op, &p, &[1.0, 2.0, 3.0], false).unwrap();
        assert!(out.as_slice().iter().all(|x| x.abs() < 1e-11));
        let with = oracle_divergence(&u, &op, &p, &[1.0, 2.0, 3.0], true).unwrap();
        let s = source(&AcmHdState::new(3, vals).unwrap(), &p).0;
        for pt in 0..64 {
            for (v, sv) in s.iter().enumerate() {
                assert!((with.get(1, pt, v) - sv).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn linear_velocity_field() {
        for p in 2..=4 {
            let op = OperatorMatrix::gauss_legendre(p).unwrap();
            let mut u = StateField::zeros(p, 3, 1);
            let m = p + 1;
            for pt in 0..m * m * m {
                u.set(0, pt, vel(0), op.nodes[pt % m]);
            }
            let ph = params();
            let out = oracle_divergence(&u, &op, &ph, &[1.0; 3], false).unwrap();
            for pt in 0..m * m * m {
                let x = op.nodes[pt % m];
                assert!((out.get(0, pt, 0) + ph.zeta).abs() < 1e-11);
                assert!((out.get(0, pt, vel(0)) + 2.0 * x).abs() < 1e-11);
                assert!((out.get(0, pt, grad(3, 0, 0)) - 1.0 / ph.t_relax).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn matches_dense_operator() {
        let ph = params();
        for d in [2, 3] {
            for p in 1..=4 {
                for seed in 0..10 {
                    let op = OperatorMatrix::gauss_legendre(p).unwrap();
                    let u = StateField::random(p, d, 3, seed);
                    let jac = [1.5, 0.5, 2.0];
                    let fast = oracle_divergence(&u, &op, &ph, &jac[..d], false).unwrap();
                    let dense = dense_reference(&u, &op, &ph, &jac[..d]);
                    for (a, b) in fast.as_slice().iter().zip(dense.as_slice()) {
                        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let op = OperatorMatrix::gauss_legendre(2).unwrap();
        let u = StateField::zeros(3, 3, 1);
        let ph = params();
        assert_eq!(
            oracle_divergence(&u, &op, &ph, &[1.0; 3], false),
            Err(OracleError::OperatorSize { op: 3, field: 4 })
        );
        let u = StateField::zeros(2, 3, 1);
        assert_eq!(
            oracle_divergence(&u, &op, &ph, &[1.0; 2], false),
            Err(OracleError::Jacobian { expected: 3, got: 2 })
        );
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("point count {0} outside supported range 2..=8")]
    PointCount(usize),
    #[error("nodes {0} and {1} coincide")]
    DuplicateNodes(usize, usize),
}

/// Gauss-Legendre abscissae on `(-1, 1)`, ascending.
pub fn gauss_legendre_points(m: usize) -> Result<Vec<f64>, OperatorError> {
    if !(2..=8).contains(&m) {
        return Err(OperatorError::PointCount(m));
    }
    let mut nodes = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton on P_m.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pm, dpm) = legendre(m, x);
            let dx = pm / dpm;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        nodes[m - 1 - i] = -x;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    Ok(nodes)
}

/// `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodal derivative operator `D[j][k] = l_k'(x_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix {
    pub nodes: Vec<f64>,
    /// Row-major `m x m`.
    pub entries: Vec<f64>,
}

impl OperatorMatrix {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.nodes.len() + col]
    }

    /// Operator on Gauss-Legendre points with `m = p + 1`.
    pub fn gauss_legendre(p: usize) -> Result<Self, OperatorError> {
        derivative_matrix(&gauss_legendre_points(p + 1)?)
    }
}

/// Lagrange derivative matrix from barycentric weights.
pub fn derivative_matrix(nodes: &[f64]) -> Result<OperatorMatrix, OperatorError> {
    let m = nodes.len();
    for a in 0..m {
        for b in a + 1..m {
            if nodes[a] == nodes[b] {
                return Err(OperatorError::DuplicateNodes(a, b));
            }
        }
    }
    let weights: Vec<f64> = (0..m)
        .map(|k| {
            1.0 / (0..m).filter(|&j| j != k).map(|j| nodes[k] - nodes[j]).product::<f64>()
        })
        .collect();
    let mut entries = vec![0.0; m * m];
    for j in 0..m {
        let mut diag = 0.0;
        for k in 0..m {
            if k != j {
                let v = (weights[k] / weights[j]) / (nodes[j] - nodes[k]);
                entries[j * m + k] = v;
                diag -= v;
            }
        }
        entries[j * m + j] = diag;
    }
    Ok(OperatorMatrix { nodes: nodes.to_vec(), entries })
}

fn constant_key(x: f64) -> String {
    // 12 significant digits; fold -0 onto 0
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// `(raw, sign_folded)` counts of distinct operator entries.
pub fn unique_constants(op: &OperatorMatrix) -> (usize, usize) {
    let raw: std::collections::BTreeSet<_> = op.entries.iter().map(|&x| constant_key(x)).collect();
    let folded: std::collections::BTreeSet<_> =
        op.entries.iter().map(|&x| constant_key(x.abs())).collect();
    (raw.len(), folded.len())
}

/// Sign-folded table of the nonzero operator magnitudes, with a lookup for
/// every matrix entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstTable {
    pub values: Vec<f64>,
    /// Per entry (row-major): `None` for a zero entry, else `(index, negate)`.
    pub lookup: Vec<Option<(usize, bool)>>,
}

impl ConstTable {
    pub fn sign_folded(op: &OperatorMatrix) -> Self {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut values = Vec::new();
        let lookup = op
            .entries
            .iter()
            .map(|&x| {
                if x == 0.0 {
                    return None;
                }
                let key = constant_key(x.abs());
                let idx = *index.entry(key).or_insert_with(|| {
                    values.push(x.abs());
                    values.len() - 1
                });
                Some((idx, x < 0.0))
            })
            .collect();
        Self { values, lookup }
    }
}

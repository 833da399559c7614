use std::f64::consts::PI;

use super::StateField;
use crate::equations::{grad, vel};

/// Taylor-Green vortex initial state at `(x, y, z)`: `P, V` and the exact
/// velocity gradients, in solved-variable order.
pub fn tgv_point(x: f64, y: f64, z: f64, mach: f64, gamma: f64) -> [f64; 13] {
    let (sx, cx) = x.sin_cos();
    let (sy, cy) = y.sin_cos();
    let (sz, cz) = z.sin_cos();
    let mut s = [0.0; 13];
    s[0] = 1.0 / (gamma * mach * mach)
        + (2.0 * z + 2.0).cos() * ((2.0 * x).cos() + (2.0 * y).cos()) / 16.0;
    s[vel(0)] = sx * cy * cz;
    s[vel(1)] = -cx * sy * cz;
    s[grad(3, 0, 0)] = cx * cy * cz;
    s[grad(3, 0, 1)] = -sx * sy * cz;
    s[grad(3, 0, 2)] = -sx * cy * sz;
    s[grad(3, 1, 0)] = sx * sy * cz;
    s[grad(3, 1, 1)] = -cx * cy * cz;
    s[grad(3, 1, 2)] = cx * sy * sz;
    s
}

/// Uniform hexahedral mesh of the periodic box `[0, 2 pi]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgvMesh {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl TgvMesh {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub fn n_elem(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn widths(&self) -> [f64; 3] {
        [2.0 * PI / self.nx as f64, 2.0 * PI / self.ny as f64, 2.0 * PI / self.nz as f64]
    }

    /// Reference-to-physical derivative scale per axis, `2 / h`.
    pub fn jacobian(&self) -> [f64; 3] {
        self.widths().map(|h| 2.0 / h)
    }
}

/// Samples the vortex at the solution points `nodes` (on `[-1, 1]`) of every
/// element; element `ex + nx (ey + ny ez)`.
pub fn tgv_state(mesh: &TgvMesh, nodes: &[f64], mach: f64, gamma: f64) -> StateField {
    let m = nodes.len();
    let mut f = StateField::zeros(m - 1, 3, mesh.n_elem());
    let h = mesh.widths();
    let coord = |cell: usize, axis: usize, r: f64| (cell as f64 + (r + 1.0) / 2.0) * h[axis];
    for ez in 0..mesh.nz {
        for ey in 0..mesh.ny {
            for ex in 0..mesh.nx {
                let e = ex + mesh.nx * (ey + mesh.ny * ez);
                for k in 0..m {
                    for j in 0..m {
                        for i in 0..m {
                            let s = tgv_point(
                                coord(ex, 0, nodes[i]),
                                coord(ey, 1, nodes[j]),
                                coord(ez, 2, nodes[k]),
                                mach,
                                gamma,
                            );
                            let pt = f.point(i, j, k);
                            for (v, x) in s.iter().enumerate() {
                                f.set(e, pt, v, *x);
                            }
                        }
                    }
                }
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::PhysParams;
    use crate::fr::{oracle_divergence, OperatorMatrix};

    #[test]
    fn origin_values() {
        let s = tgv_point(0.0, 0.0, 0.0, 0.08, 1.4);
        assert_eq!(s[vel(0)], 0.0);
        assert_eq!(s[vel(1)], 0.0);
        assert_eq!(s[vel(2)], 0.0);
        assert_eq!(s[grad(3, 0, 0)], 1.0);
        let p = 1.0 / (1.4 * 0.08 * 0.08) + 2.0f64.cos() * 2.0 / 16.0;
        assert!((s[0] - p).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, y, z, eps) = (0.3, -1.1, 2.4, 1e-6);
        let s = tgv_point(x, y, z, 0.08, 1.4);
        for c in 0..3 {
            let mut hi = [x, y, z];
            let mut lo = [x, y, z];
            hi[c] += eps;
            lo[c] -= eps;
            let a = tgv_point(hi[0], hi[1], hi[2], 0.08, 1.4);
            let b = tgv_point(lo[0], lo[1], lo[2], 0.08, 1.4);
            for bvel in 0..3 {
                let fd = (a[vel(bvel)] - b[vel(bvel)]) / (2.0 * eps);
                assert!((fd - s[grad(3, bvel, c)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn continuity_residual_converges_with_order() {
        // V is divergence free, so the continuity slot is pure interpolation error
        let mesh = TgvMesh::new(4, 4, 4);
        let params = PhysParams::default();
        let mut prev = f64::INFINITY;
        for p in 2..=5 {
            let op = OperatorMatrix::gauss_legendre(p).unwrap();
            let f = tgv_state(&mesh, &op.nodes, 0.08, 1.4);
            let out = oracle_divergence(&f, &op, &params, &mesh.jacobian(), false).unwrap();
            let mut worst: f64 = 0.0;
            for e in 0..mesh.n_elem() {
                for pt in 0..f.n_s() {
                    worst = worst.max(out.get(e, pt, 0).abs());
                }
            }
            assert!(worst < prev, "p={p}: {worst} !< {prev}");
            prev = worst;
        }
        assert!(prev < 1e-2);
    }
}

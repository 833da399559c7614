use acmhd_fuse::codegen::{LinesVars, Method};
use acmhd_fuse::fr::Precision;
use serde::Serialize;

/// A tuned kernel configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub method: Method,
    pub p: usize,
    pub precision: Precision,
    pub block_threads: usize,
}

impl Preset {
    /// Shared allocation fixed by the preset, when the method takes one.
    pub fn smem_bytes(&self) -> Option<usize> {
        match self.method {
            Method::PlanarManaged { smem_bytes } => Some(smem_bytes),
            _ => None,
        }
    }
}

const fn preset(name: &'static str, method: Method, p: usize, precision: Precision, block_threads: usize) -> Preset {
    Preset { name, method, p, precision, block_threads }
}

pub const PRESETS: [Preset; 8] = [
    preset("fp32-p1", Method::PlanarUnmanaged, 1, Precision::Fp32, 128),
    preset("fp32-p2", Method::PlanarUnmanaged, 2, Precision::Fp32, 128),
    preset("fp32-p3", Method::PlanarManaged { smem_bytes: 67_584 }, 3, Precision::Fp32, 128),
    preset("fp32-p4", Method::Lines { vars: LinesVars::V24 }, 4, Precision::Fp32, 200),
    preset("fp64-p1", Method::PlanarManaged { smem_bytes: 43_008 }, 1, Precision::Fp64, 128),
    preset("fp64-p2", Method::PlanarManaged { smem_bytes: 60_416 }, 2, Precision::Fp64, 128),
    preset("fp64-p3", Method::Lines { vars: LinesVars::V15 }, 3, Precision::Fp64, 192),
    preset("fp64-p4", Method::Lines { vars: LinesVars::V12 }, 4, Precision::Fp64, 200),
];

pub fn find(name: &str) -> Option<Preset> {
    PRESETS.iter().copied().find(|p| p.name.eq_ignore_ascii_case(name))
}

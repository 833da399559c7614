use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Precision;

/// Number of consecutive elements interleaved per variable in global memory.
pub const SOA_WIDTH: usize = 32;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error("blob holds {got} bytes, sidecar implies {expected}")]
    Size { got: usize, expected: usize },
    #[error("field shapes differ")]
    Shape,
}

/// Solution-point values of every element, stored in AoSoA order.
///
/// Element `e`, point `(i, j, k)` and variable `v` live at
/// `(e / A) A n_s n_v + (e mod A) + A (i + j m + k m^2 + v m^3)` with
/// `A = SOA_WIDTH`; trailing slots of a partial group are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    p: usize,
    d: usize,
    n_elem: usize,
    data: Vec<f64>,
}

/// JSON description written next to a binary field blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub p: usize,
    pub d: usize,
    pub n_elem: usize,
    pub n_vars: usize,
    pub soa_width: usize,
    pub precision: Precision,
    pub layout: String,
    pub endianness: String,
}

impl StateField {
    pub fn zeros(p: usize, d: usize, n_elem: usize) -> Self {
        let mut f = Self { p, d, n_elem, data: Vec::new() };
        f.data = vec![0.0; f.storage_len()];
        f
    }

    /// Uniform values in `[-1, 1]` from a seeded generator.
    pub fn random(p: usize, d: usize, n_elem: usize, seed: u64) -> Self {
        let mut f = Self::zeros(p, d, n_elem);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ns, nv) = (f.n_s(), f.n_vars());
        for e in 0..n_elem {
            for v in 0..nv {
                for pt in 0..ns {
                    f.set(e, pt, v, rng.gen_range(-1.0..=1.0));
                }
            }
        }
        f
    }

    pub fn p(&self) -> usize {
        self.p
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn m(&self) -> usize {
        self.p + 1
    }
    pub fn n_elem(&self) -> usize {
        self.n_elem
    }
    pub fn n_s(&self) -> usize {
        self.m().pow(self.d as u32)
    }
    pub fn n_vars(&self) -> usize {
        1 + self.d + self.d * self.d
    }

    /// Words in the padded AoSoA image.
    pub fn storage_len(&self) -> usize {
        self.n_elem.div_ceil(SOA_WIDTH) * SOA_WIDTH * self.n_s() * self.n_vars()
    }

    #[inline]
    pub fn offset(&self, e: usize, pt: usize, v: usize) -> usize {
        let a = SOA_WIDTH;
        (e / a) * a * self.n_s() * self.n_vars() + e % a + a * (pt + self.n_s() * v)
    }

    /// Linear point index of `(i, j, k)`.
    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> usize {
        let m = self.m();
        i + j * m + k * m * m
    }

    #[inline]
    pub fn get(&self, e: usize, pt: usize, v: usize) -> f64 {
        self.data[self.offset(e, pt, v)]
    }

    #[inline]
    pub fn set(&mut self, e: usize, pt: usize, v: usize, x: f64) {
        let o = self.offset(e, pt, v);
        self.data[o] = x;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Wraps an existing AoSoA image.
    pub fn from_storage(p: usize, d: usize, n_elem: usize, data: Vec<f64>) -> Result<Self, FieldError> {
        let f = Self { p, d, n_elem, data: Vec::new() };
        if data.len() != f.storage_len() {
            return Err(FieldError::Size { got: data.len(), expected: f.storage_len() });
        }
        Ok(Self { data, ..f })
    }

    /// Copy with every value rounded to `precision`.
    pub fn rounded(&self, precision: Precision) -> Self {
        let mut out = self.clone();
        for x in &mut out.data {
            *x = precision.round(*x);
        }
        out
    }

    pub fn same_shape(&self, other: &StateField) -> bool {
        self.p == other.p && self.d == other.d && self.n_elem == other.n_elem
    }

    pub fn sidecar(&self, precision: Precision) -> FieldSidecar {
        FieldSidecar {
            p: self.p,
            d: self.d,
            n_elem: self.n_elem,
            n_vars: self.n_vars(),
            soa_width: SOA_WIDTH,
            precision,
            layout: "aosoa".into(),
            endianness: "little".into(),
        }
    }

    /// Little-endian words of the configured precision, AoSoA order.
    pub fn write_blob<W: Write>(&self, mut w: W, precision: Precision) -> Result<(), FieldError> {
        for &x in &self.data {
            match precision {
                Precision::Fp32 => w.write_all(&(x as f32).to_le_bytes())?,
                Precision::Fp64 => w.write_all(&x.to_le_bytes())?,
            }
        }
        Ok(())
    }

    pub fn read_blob<R: Read>(mut r: R, sidecar: &FieldSidecar) -> Result<Self, FieldError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut f = Self::zeros(sidecar.p, sidecar.d, sidecar.n_elem);
        let wb = sidecar.precision.word_bytes();
        let expected = f.storage_len() * wb;
        if bytes.len() != expected || sidecar.soa_width != SOA_WIDTH {
            return Err(FieldError::Size { got: bytes.len(), expected });
        }
        for (x, chunk) in f.data.iter_mut().zip(bytes.chunks_exact(wb)) {
            *x = match sidecar.precision {
                Precision::Fp32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
                Precision::Fp64 => f64::from_le_bytes(chunk.try_into().unwrap()),
            };
        }
        Ok(f)
    }

    /// Writes `<stem>.bin` and `<stem>.json`.
    pub fn save(&self, stem: &Path, precision: Precision) -> Result<(), FieldError> {
        let bin = std::fs::File::create(stem.with_extension("bin"))?;
        self.write_blob(std::io::BufWriter::new(bin), precision)?;
        let json = serde_json::to_string_pretty(&self.sidecar(precision))?;
        std::fs::write(stem.with_extension("json"), json)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<(Self, Precision), FieldError> {
        let sidecar: FieldSidecar =
            serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let bin = std::fs::File::open(stem.with_extension("bin"))?;
        Ok((Self::read_blob(std::io::BufReader::new(bin), &sidecar)?, sidecar.precision))
    }
}

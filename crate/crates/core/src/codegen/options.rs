use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CodegenError;

/// Agglomeration block sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agglomerate {
    pub min_block: usize,
    /// Blocks longer than this are split when the other category can run.
    pub max_block: Option<usize>,
}

impl Default for Agglomerate {
    fn default() -> Self {
        Self { min_block: 13, max_block: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionSet {
    /// Read the x-line point that lies on the resident y-line from registers.
    pub register_overlap: bool,
    /// Pad the shared element stride so planned accesses are conflict-free.
    pub deconflict: bool,
    /// Read operator constants from a sign-folded constant table.
    pub cmem_constants: bool,
    /// Global to register to shared (GRS) rather than global to shared to
    /// register (GSR).
    pub explicit_grs: bool,
    pub load_hints: bool,
    pub store_hints: bool,
    pub interleave_asap: bool,
    pub agglomerate: Option<Agglomerate>,
    /// Fuse the source term into the kernel.
    pub fuse_source: bool,
}

impl Default for OptionSet {
    /// Case 13 of the option table: GRS, deconfliction and load hints.
    fn default() -> Self {
        OptionSet::case(13).expect("case 13 exists")
    }
}

pub const OPTION_CASES: usize = 18;

impl OptionSet {
    /// Every optimisation off.
    pub fn none() -> Self {
        Self {
            register_overlap: false,
            deconflict: false,
            cmem_constants: false,
            explicit_grs: false,
            load_hints: false,
            store_hints: false,
            interleave_asap: false,
            agglomerate: None,
            fuse_source: false,
        }
    }

    /// The four static optimisations of the unmanaged planar kernel.
    pub fn static_all() -> Self {
        Self { register_overlap: true, deconflict: true, cmem_constants: true, explicit_grs: true, ..Self::none() }
    }

    /// Row `case` of the managed-kernel option table. Constant-table reads and
    /// register overlap are on in every row.
    pub fn case(case: usize) -> Option<Self> {
        // (grs, deconflict, interleave, agglomerate, load, store)
        const ROWS: [(bool, bool, bool, bool, bool, bool); OPTION_CASES] = [
            (false, false, false, false, false, false),
            (true, false, false, false, false, false),
            (false, true, false, false, false, false),
            (true, true, false, false, false, false),
            (false, true, true, false, false, false),
            (true, true, true, false, false, false),
            (false, true, true, false, false, true),
            (true, true, true, false, false, true),
            (false, true, true, false, true, false),
            (true, true, true, false, true, false),
            (false, true, true, false, true, true),
            (true, true, true, false, true, true),
            (false, true, false, false, true, false),
            (true, true, false, false, true, false),
            (false, true, false, true, false, false),
            (false, true, false, true, true, false),
            (false, true, false, true, false, true),
            (false, true, false, true, true, true),
        ];
        let (grs, deconflict, interleave, agglomerate, load, store) = *ROWS.get(case)?;
        Some(Self {
            register_overlap: true,
            deconflict,
            cmem_constants: true,
            explicit_grs: grs,
            load_hints: load,
            store_hints: store,
            interleave_asap: interleave,
            agglomerate: agglomerate.then(Agglomerate::default),
            fuse_source: false,
        })
    }

    pub fn validate(&self) -> Result<(), CodegenError> {
        if self.interleave_asap && self.agglomerate.is_some() {
            return Err(CodegenError::Options("interleave and agglomerate are mutually exclusive".into()));
        }
        if let Some(a) = self.agglomerate {
            if a.min_block == 0 || a.max_block.is_some_and(|m| m < a.min_block) {
                return Err(CodegenError::Options("agglomerate needs 0 < min_block <= max_block".into()));
            }
        }
        Ok(())
    }

    /// Parses a comma list such as `reg-overlap,deconflict,cmem,grs`; flags
    /// not named are off.
    pub fn parse_list(list: &str) -> Result<Self, CodegenError> {
        let mut o = Self::none();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "reg-overlap" => o.register_overlap = true,
                "deconflict" => o.deconflict = true,
                "cmem" => o.cmem_constants = true,
                "grs" => o.explicit_grs = true,
                "gsr" => o.explicit_grs = false,
                "load-hints" => o.load_hints = true,
                "store-hints" => o.store_hints = true,
                "interleave" => o.interleave_asap = true,
                "agglomerate" => o.agglomerate = Some(Agglomerate::default()),
                "fuse-source" => o.fuse_source = true,
                other => return Err(CodegenError::Options(format!("unknown option `{other}`"))),
            }
        }
        o.validate()?;
        Ok(o)
    }

    pub fn to_list(&self) -> String {
        let mut v = Vec::new();
        let flags = [
            (self.register_overlap, "reg-overlap"),
            (self.deconflict, "deconflict"),
            (self.cmem_constants, "cmem"),
            (self.explicit_grs, "grs"),
            (!self.explicit_grs, "gsr"),
            (self.load_hints, "load-hints"),
            (self.store_hints, "store-hints"),
            (self.interleave_asap, "interleave"),
            (self.agglomerate.is_some(), "agglomerate"),
            (self.fuse_source, "fuse-source"),
        ];
        for (on, name) in flags {
            if on {
                v.push(name);
            }
        }
        v.join(",")
    }
}

/// Per-point shared storage of the lines method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum LinesVars {
    /// Velocity and pressure-augmented gradients, 13 accumulators.
    V25,
    /// As 25 with the continuity accumulator reconstructed.
    V24,
    /// Velocity and the diagonal augmented gradients.
    V18,
    /// Velocity only.
    V15,
    /// Nothing stored; every state read goes to global memory.
    V12,
}

impl LinesVars {
    pub const ALL: [LinesVars; 5] = [LinesVars::V25, LinesVars::V24, LinesVars::V18, LinesVars::V15, LinesVars::V12];

    pub fn total(self) -> usize {
        self.stored() + self.accumulators()
    }

    pub fn stored(self) -> usize {
        match self {
            LinesVars::V25 | LinesVars::V24 => 12,
            LinesVars::V18 => 6,
            LinesVars::V15 => 3,
            LinesVars::V12 => 0,
        }
    }

    pub fn accumulators(self) -> usize {
        match self {
            LinesVars::V25 => 13,
            _ => 12,
        }
    }
}

impl TryFrom<u32> for LinesVars {
    type Error = CodegenError;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        match v {
            25 => Ok(LinesVars::V25),
            24 => Ok(LinesVars::V24),
            18 => Ok(LinesVars::V18),
            15 => Ok(LinesVars::V15),
            12 => Ok(LinesVars::V12),
            other => Err(CodegenError::Options(format!("no lines configuration with {other} variables"))),
        }
    }
}

impl From<LinesVars> for u32 {
    fn from(v: LinesVars) -> u32 {
        v.total() as u32
    }
}

impl fmt::Display for LinesVars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.total())
    }
}

impl FromStr for LinesVars {
    type Err = CodegenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n: u32 = s.parse().map_err(|_| CodegenError::Options(format!("bad variable count `{s}`")))?;
        LinesVars::try_from(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    PlanarUnmanaged,
    PlanarManaged { smem_bytes: usize },
    Lines { vars: LinesVars },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::PlanarUnmanaged => f.write_str("planar"),
            Method::PlanarManaged { .. } => f.write_str("planar-managed"),
            Method::Lines { vars } => write!(f, "lines-{vars}"),
        }
    }
}

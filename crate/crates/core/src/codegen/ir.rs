use serde::{Deserialize, Serialize};

use super::options::{Method, OptionSet};
use crate::fr::ElementConfig;

pub const IR_VERSION: u32 = 1;

pub type Reg = u32;
pub type LoopId = u32;

/// Integer expression over the thread and block indices, evaluated once per
/// thread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexExpr {
    Tid,
    Bid,
    Const(i64),
    /// Value of an earlier entry of the base table.
    Base(usize),
    Add(Box<IndexExpr>, Box<IndexExpr>),
    Mul(Box<IndexExpr>, i64),
    Div(Box<IndexExpr>, i64),
    Mod(Box<IndexExpr>, i64),
    /// `table[index]`, for indices that have no closed form.
    Lookup(Vec<i64>, Box<IndexExpr>),
}

impl IndexExpr {
    pub fn base(id: usize) -> Self {
        IndexExpr::Base(id)
    }

    pub fn add(self, rhs: IndexExpr) -> Self {
        IndexExpr::Add(Box::new(self), Box::new(rhs))
    }

    pub fn mul(self, c: i64) -> Self {
        IndexExpr::Mul(Box::new(self), c)
    }

    pub fn div(self, c: i64) -> Self {
        IndexExpr::Div(Box::new(self), c)
    }

    pub fn rem(self, c: i64) -> Self {
        IndexExpr::Mod(Box::new(self), c)
    }

    pub fn eval(&self, tid: i64, bid: i64, bases: &[i64]) -> i64 {
        match self {
            IndexExpr::Tid => tid,
            IndexExpr::Bid => bid,
            IndexExpr::Const(c) => *c,
            IndexExpr::Base(b) => bases[*b],
            IndexExpr::Add(a, b) => a.eval(tid, bid, bases) + b.eval(tid, bid, bases),
            IndexExpr::Mul(a, c) => a.eval(tid, bid, bases) * c,
            IndexExpr::Div(a, c) => a.eval(tid, bid, bases).div_euclid(*c),
            IndexExpr::Mod(a, c) => a.eval(tid, bid, bases).rem_euclid(*c),
            IndexExpr::Lookup(t, i) => t[i.eval(tid, bid, bases) as usize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Base {
    pub name: String,
    pub expr: IndexExpr,
}

/// Word address `base + offset + sum(coeff * loop counter)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Addr {
    pub base: Option<usize>,
    pub offset: i64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loop_terms: Vec<(LoopId, i64)>,
}

impl Addr {
    pub fn at(base: usize, offset: i64) -> Self {
        Self { base: Some(base), offset, loop_terms: Vec::new() }
    }

    pub fn fixed(offset: i64) -> Self {
        Self { base: None, offset, loop_terms: Vec::new() }
    }

    pub fn with_loop(mut self, id: LoopId, coeff: i64) -> Self {
        if coeff != 0 {
            self.loop_terms.push((id, coeff));
        }
        self
    }
}

/// Runtime scalar kernel arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Zeta,
    NegNu,
    NegInvT,
    NegJac(u8),
    NegZetaT,
}

impl Param {
    pub const ALL: [Param; 7] = [
        Param::Zeta,
        Param::NegNu,
        Param::NegInvT,
        Param::NegJac(0),
        Param::NegJac(1),
        Param::NegJac(2),
        Param::NegZetaT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Zeta => "zeta",
            Param::NegNu => "neg_nu",
            Param::NegInvT => "neg_inv_t",
            Param::NegJac(0) => "neg_jac_x",
            Param::NegJac(1) => "neg_jac_y",
            Param::NegJac(_) => "neg_jac_z",
            Param::NegZetaT => "neg_zeta_t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Reg(Reg),
    Imm(f64),
    Param(Param),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadHint {
    #[default]
    Default,
    Lu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreHint {
    #[default]
    Default,
    Wt,
}

/// How a constant-table read is turned into a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstMode {
    Plain,
    Negated,
    /// Address `a` in `[0, 2n)`: `table[a]` below `n`, `-table[a - n]` above.
    SignedIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Instr {
    LoadGlobal { dst: Reg, addr: Addr, hint: LoadHint },
    StoreGlobal { src: Reg, addr: Addr, hint: StoreHint },
    LoadShared { dst: Reg, addr: Addr },
    StoreShared { src: Reg, addr: Addr },
    LoadConst { dst: Reg, addr: Addr, mode: ConstMode },
    /// `values[base]`: an immediate chosen by a per-thread index.
    Select { dst: Reg, index: usize, values: Vec<f64> },
    Mov { dst: Reg, src: Operand },
    Add { dst: Reg, a: Operand, b: Operand },
    Mul { dst: Reg, a: Operand, b: Operand },
    Neg { dst: Reg, a: Operand },
    /// `a * b + c`.
    Fma { dst: Reg, a: Operand, b: Operand, c: Operand },
    Barrier,
    LoopBegin { id: LoopId, count: u32 },
    LoopEnd { id: LoopId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Memory,
    Compute,
    /// Barriers and loop markers, which nothing moves across.
    Wall,
}

impl Instr {
    pub fn category(&self) -> Category {
        match self {
            Instr::LoadGlobal { .. }
            | Instr::StoreGlobal { .. }
            | Instr::LoadShared { .. }
            | Instr::StoreShared { .. }
            | Instr::LoadConst { .. } => Category::Memory,
            Instr::Barrier | Instr::LoopBegin { .. } | Instr::LoopEnd { .. } => Category::Wall,
            _ => Category::Compute,
        }
    }

    pub fn is_arithmetic(&self) -> bool {
        matches!(
            self,
            Instr::Mov { .. }
                | Instr::Add { .. }
                | Instr::Mul { .. }
                | Instr::Neg { .. }
                | Instr::Fma { .. }
                | Instr::Select { .. }
        )
    }

    pub fn def(&self) -> Option<Reg> {
        match self {
            Instr::LoadGlobal { dst, .. }
            | Instr::LoadShared { dst, .. }
            | Instr::LoadConst { dst, .. }
            | Instr::Select { dst, .. }
            | Instr::Mov { dst, .. }
            | Instr::Add { dst, .. }
            | Instr::Mul { dst, .. }
            | Instr::Neg { dst, .. }
            | Instr::Fma { dst, .. } => Some(*dst),
            _ => None,
        }
    }

    pub fn uses(&self) -> Vec<Reg> {
        let regs = |ops: &[&Operand]| {
            ops.iter()
                .filter_map(|o| match o {
                    Operand::Reg(r) => Some(*r),
                    _ => None,
                })
                .collect::<Vec<_>>()
        };
        match self {
            Instr::StoreGlobal { src, .. } | Instr::StoreShared { src, .. } => vec![*src],
            Instr::Mov { src, .. } => regs(&[src]),
            Instr::Neg { a, .. } => regs(&[a]),
            Instr::Add { a, b, .. } | Instr::Mul { a, b, .. } => regs(&[a, b]),
            Instr::Fma { a, b, c, .. } => regs(&[a, b, c]),
            _ => Vec::new(),
        }
    }

    /// Value operands of an arithmetic instruction.
    pub fn operands(&self) -> Vec<Operand> {
        match self {
            Instr::Mov { src, .. } => vec![*src],
            Instr::Neg { a, .. } => vec![*a],
            Instr::Add { a, b, .. } | Instr::Mul { a, b, .. } => vec![*a, *b],
            Instr::Fma { a, b, c, .. } => vec![*a, *b, *c],
            _ => Vec::new(),
        }
    }

    /// Register accumulated into, for `r = x * y + r` and `r = r + x`.
    pub fn accumulates(&self) -> Option<Reg> {
        match self {
            Instr::Fma { dst, a, b, c: Operand::Reg(c) } if c == dst => {
                (*a != Operand::Reg(*dst) && *b != Operand::Reg(*dst)).then_some(*dst)
            }
            Instr::Add { dst, a: Operand::Reg(a), b } if a == dst && *b != Operand::Reg(*dst) => Some(*dst),
            Instr::Add { dst, a, b: Operand::Reg(b) } if b == dst && *a != Operand::Reg(*dst) => Some(*dst),
            _ => None,
        }
    }
}

/// Kernel-wide predicate: a thread runs memory instructions only when every
/// guard base is below its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Const(i64),
    ElementCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    pub base: usize,
    pub limit: Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub name: String,
    pub cfg: ElementConfig,
    pub method: Method,
    pub opts: OptionSet,
    pub elements_per_block: usize,
    pub shared_words: usize,
    pub shared_bytes: usize,
    pub const_table: Vec<f64>,
    /// Shared layout padding between elements, in words.
    pub shared_pad_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelIR {
    pub version: u32,
    pub meta: KernelMeta,
    pub bases: Vec<Base>,
    pub guards: Vec<Guard>,
    pub n_regs: u32,
    pub instrs: Vec<Instr>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrMetrics {
    pub instructions: usize,
    pub load_global: usize,
    pub store_global: usize,
    pub load_shared: usize,
    pub store_shared: usize,
    pub load_const: usize,
    pub arithmetic: usize,
    pub barriers: usize,
    pub loops: usize,
    pub register_pressure: usize,
}

impl KernelIR {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, super::CodegenError> {
        let ir: KernelIR = serde_json::from_str(text).map_err(|e| super::CodegenError::Json(e.to_string()))?;
        if ir.version != IR_VERSION {
            return Err(super::CodegenError::Version(ir.version));
        }
        Ok(ir)
    }

    pub fn metrics(&self) -> IrMetrics {
        let mut m = IrMetrics { instructions: self.instrs.len(), ..Default::default() };
        for ins in &self.instrs {
            match ins {
                Instr::LoadGlobal { .. } => m.load_global += 1,
                Instr::StoreGlobal { .. } => m.store_global += 1,
                Instr::LoadShared { .. } => m.load_shared += 1,
                Instr::StoreShared { .. } => m.store_shared += 1,
                Instr::LoadConst { .. } => m.load_const += 1,
                Instr::Barrier => m.barriers += 1,
                Instr::LoopBegin { .. } => m.loops += 1,
                Instr::LoopEnd { .. } => {}
                _ => m.arithmetic += 1,
            }
        }
        m.register_pressure = register_pressure(&self.instrs, self.n_regs as usize);
        m
    }
}

/// Largest number of simultaneously live registers, from a backward liveness
/// fixed point over the straight-line code and its loop back edges.
pub fn register_pressure(instrs: &[Instr], n_regs: usize) -> usize {
    let words = n_regs.div_ceil(64).max(1);
    let n = instrs.len();
    // successor of each LoopEnd besides fall-through: the first body instruction
    let mut back = vec![None; n];
    let mut open = Vec::new();
    for (i, ins) in instrs.iter().enumerate() {
        match ins {
            Instr::LoopBegin { .. } => open.push(i),
            Instr::LoopEnd { .. } => back[i] = open.pop().map(|b| b + 1),
            _ => {}
        }
    }
    let mut live_in = vec![0u64; (n + 1) * words];
    let mut changed = true;
    let mut peak = 0;
    while changed {
        changed = false;
        peak = 0;
        for i in (0..n).rev() {
            let mut set: Vec<u64> = live_in[(i + 1) * words..(i + 2) * words].to_vec();
            if let Some(t) = back[i] {
                for w in 0..words {
                    set[w] |= live_in[t * words + w];
                }
            }
            if let Some(d) = instrs[i].def() {
                set[d as usize / 64] &= !(1u64 << (d % 64));
            }
            for u in instrs[i].uses() {
                set[u as usize / 64] |= 1u64 << (u % 64);
            }
            let count: usize = set.iter().map(|w| w.count_ones() as usize).sum();
            peak = peak.max(count);
            let slot = &mut live_in[i * words..(i + 1) * words];
            if slot != set.as_slice() {
                slot.copy_from_slice(&set);
                changed = true;
            }
        }
    }
    peak
}

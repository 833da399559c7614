use super::ir::{Addr, Base, Guard, IndexExpr, Instr, LoopId, Operand, Param, Reg};
use crate::equations::{grad, vel};

pub(crate) const NV: usize = 13;

/// Variables that enter the flux in direction `a`: pressure, velocity and
/// the gradient column `a`.
pub(crate) fn flux_inputs(a: usize) -> [usize; 7] {
    [0, vel(0), vel(1), vel(2), grad(3, 0, a), grad(3, 1, a), grad(3, 2, a)]
}

/// Straight-line IR under construction. Every value gets a fresh register;
/// only accumulators are written more than once.
#[derive(Default)]
pub(crate) struct Builder {
    pub bases: Vec<Base>,
    pub guards: Vec<Guard>,
    pub instrs: Vec<Instr>,
    next_reg: Reg,
    next_loop: LoopId,
}

impl Builder {
    pub fn base(&mut self, name: &str, expr: IndexExpr) -> usize {
        self.bases.push(Base { name: name.to_string(), expr });
        self.bases.len() - 1
    }

    pub fn reg(&mut self) -> Reg {
        self.next_reg += 1;
        self.next_reg - 1
    }

    pub fn n_regs(&self) -> u32 {
        self.next_reg
    }

    pub fn push(&mut self, i: Instr) {
        self.instrs.push(i);
    }

    pub fn ldg(&mut self, addr: Addr) -> Reg {
        let dst = self.reg();
        self.push(Instr::LoadGlobal { dst, addr, hint: Default::default() });
        dst
    }

    pub fn stg(&mut self, src: Reg, addr: Addr) {
        self.push(Instr::StoreGlobal { src, addr, hint: Default::default() });
    }

    pub fn lds(&mut self, addr: Addr) -> Reg {
        let dst = self.reg();
        self.push(Instr::LoadShared { dst, addr });
        dst
    }

    pub fn sts(&mut self, src: Reg, addr: Addr) {
        self.push(Instr::StoreShared { src, addr });
    }

    pub fn mul(&mut self, a: Operand, b: Operand) -> Reg {
        let dst = self.reg();
        self.push(Instr::Mul { dst, a, b });
        dst
    }

    pub fn add(&mut self, a: Operand, b: Operand) -> Reg {
        let dst = self.reg();
        self.push(Instr::Add { dst, a, b });
        dst
    }

    pub fn fma(&mut self, a: Operand, b: Operand, c: Operand) -> Reg {
        let dst = self.reg();
        self.push(Instr::Fma { dst, a, b, c });
        dst
    }

    pub fn zero(&mut self) -> Reg {
        let dst = self.reg();
        self.push(Instr::Mov { dst, src: Operand::Imm(0.0) });
        dst
    }

    /// `acc += a * b`.
    pub fn acc_fma(&mut self, acc: Reg, a: Operand, b: Operand) {
        self.push(Instr::Fma { dst: acc, a, b, c: Operand::Reg(acc) });
    }

    pub fn barrier(&mut self) {
        self.push(Instr::Barrier);
    }

    pub fn loop_begin(&mut self, count: u32) -> LoopId {
        let id = self.next_loop;
        self.next_loop += 1;
        self.push(Instr::LoopBegin { id, count });
        id
    }

    pub fn loop_end(&mut self, id: LoopId) {
        self.push(Instr::LoopEnd { id });
    }

    /// Augmented gradient `-nu G[b][a] + P delta_ab`.
    pub fn augmented(&mut self, g: Reg, p: Option<Reg>) -> Reg {
        match p {
            Some(p) => self.fma(Operand::Param(Param::NegNu), Operand::Reg(g), Operand::Reg(p)),
            None => self.mul(Operand::Param(Param::NegNu), Operand::Reg(g)),
        }
    }

    /// The nonzero flux entries in direction `a`, as `(var, reg)`, from
    /// velocity and the augmented gradients `s[b] = S[b][a]`; the continuity
    /// entry is left out unless `continuity`.
    pub fn flux_column(&mut self, a: usize, v: [Reg; 3], s: [Reg; 3], continuity: bool) -> Vec<(usize, Reg)> {
        let va = Operand::Reg(v[a]);
        let mut out = Vec::with_capacity(7);
        if continuity {
            out.push((0, self.mul(Operand::Param(Param::Zeta), va)));
        }
        for b in 0..3 {
            out.push((vel(b), self.fma(Operand::Reg(v[b]), va, Operand::Reg(s[b]))));
        }
        for b in 0..3 {
            out.push((grad(3, b, a), self.mul(Operand::Reg(v[b]), Operand::Param(Param::NegInvT))));
        }
        out
    }

    /// Flux column `a` from raw values indexed by variable, scaled by
    /// `-jac_a`.
    pub fn scaled_flux(&mut self, a: usize, vals: &[Reg]) -> Vec<(usize, Reg)> {
        let v = [vals[vel(0)], vals[vel(1)], vals[vel(2)]];
        let s: [Reg; 3] = std::array::from_fn(|b| {
            let g = vals[grad(3, b, a)];
            self.augmented(g, (b == a).then_some(vals[0]))
        });
        let mut f = self.flux_column(a, v, s, true);
        for e in f.iter_mut() {
            e.1 = self.mul(Operand::Reg(e.1), Operand::Param(Param::NegJac(a as u8)));
        }
        f
    }

    /// Adds `-G / T` to the gradient accumulators.
    pub fn source(&mut self, acc: &[Reg], vals: &[Reg]) {
        for b in 0..3 {
            for c in 0..3 {
                let g = grad(3, b, c);
                self.acc_fma(acc[g], Operand::Param(Param::NegInvT), Operand::Reg(vals[g]));
            }
        }
    }
}

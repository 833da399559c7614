use super::builder::{Builder, NV};
use super::ir::{Addr, ConstMode, Guard, IndexExpr, Instr, KernelIR, KernelMeta, Limit, LoopId, Operand, Param, Reg, IR_VERSION};
use super::options::{LinesVars, Method, OptionSet};
use super::{check_config, CodegenError, MAX_SHARED_BYTES};
use crate::equations::{grad, vel};
use crate::fr::{ElementConfig, OperatorMatrix, Precision, SOA_WIDTH};

/// Shared slot of velocity component `b`, or of the augmented gradient
/// `S[b][a]`, when the configuration stores it.
fn slot_v(vars: LinesVars, b: usize) -> Option<usize> {
    (vars.stored() >= 3).then_some(b)
}

fn slot_s(vars: LinesVars, b: usize, a: usize) -> Option<usize> {
    match vars {
        LinesVars::V25 | LinesVars::V24 => Some(3 + 3 * b + a),
        LinesVars::V18 if a == b => Some(3 + b),
        _ => None,
    }
}

/// Accumulator slot of an output variable; the continuity output has none
/// when it is reconstructed.
fn acc_index(vars: LinesVars, v: usize) -> Option<usize> {
    match vars {
        LinesVars::V25 => Some(v),
        _ => v.checked_sub(1),
    }
}

/// Where a point's values live: a shared address template and a global
/// one, each `(base, loop terms)`.
struct PointAddr {
    shared: (usize, Vec<(LoopId, i64)>),
    global: (usize, Vec<(LoopId, i64)>),
}

struct Ctx {
    vars: LinesVars,
    /// Shared words between consecutive slots, `n m^3`.
    slot_stride: i64,
    /// Global words between consecutive variables, `32 n_s`.
    var_stride: i64,
}

impl Ctx {
    fn shared(&self, p: &PointAddr, slot: usize) -> Addr {
        let mut a = Addr::at(p.shared.0, self.slot_stride * slot as i64);
        a.loop_terms = p.shared.1.clone();
        a
    }

    fn global(&self, p: &PointAddr, v: usize) -> Addr {
        let mut a = Addr::at(p.global.0, self.var_stride * v as i64);
        a.loop_terms = p.global.1.clone();
        a
    }

    fn load_var(&self, b: &mut Builder, p: &PointAddr, v: usize) -> Reg {
        b.ldg(self.global(p, v))
    }

    /// Velocity and `S[.][a]` at a point, from shared where stored and
    /// from global otherwise.
    fn operands(&self, b: &mut Builder, p: &PointAddr, a: usize) -> ([Reg; 3], [Reg; 3]) {
        let v: [Reg; 3] = std::array::from_fn(|c| match slot_v(self.vars, c) {
            Some(s) => b.lds(self.shared(p, s)),
            None => self.load_var(b, p, vel(c)),
        });
        let mut pressure = None;
        let s: [Reg; 3] = std::array::from_fn(|c| match slot_s(self.vars, c, a) {
            Some(s) => b.lds(self.shared(p, s)),
            None => {
                let g = self.load_var(b, p, grad(3, c, a));
                let pr = (c == a).then(|| *pressure.get_or_insert_with(|| self.load_var(b, p, 0)));
                b.augmented(g, pr)
            }
        });
        (v, s)
    }

    /// Accumulates `D[row][l] (-jac_a) F_a` over a line loop.
    fn contribute(&self, b: &mut Builder, acc: &[Reg], coeff: Addr, p: &PointAddr, a: usize) {
        let c = b.reg();
        b.push(Instr::LoadConst { dst: c, addr: coeff, mode: ConstMode::Plain });
        let cj = b.mul(Operand::Reg(c), Operand::Param(Param::NegJac(a as u8)));
        let (v, s) = self.operands(b, p, a);
        for (var, r) in b.flux_column(a, v, s, self.vars == LinesVars::V25) {
            let q = acc_index(self.vars, var).expect("flux entry has an accumulator");
            b.acc_fma(acc[q], Operand::Reg(cj), Operand::Reg(r));
        }
    }
}

/// Shared bytes a lines kernel needs.
pub fn lines_footprint(cfg: &ElementConfig, vars: LinesVars) -> Option<usize> {
    let n = cfg.lines_elements_per_block()?;
    Some(n * cfg.m().pow(3) * vars.total() * cfg.precision.word_bytes())
}

/// Largest lines block of at most `max_threads` whose footprint fits.
pub fn lines_block_for(p: usize, vars: LinesVars, precision: Precision, max_threads: usize) -> Option<usize> {
    let m2 = (p + 1) * (p + 1);
    (1..=max_threads / m2)
        .rev()
        .map(|n| n * m2)
        .find(|&t| lines_footprint(&ElementConfig::new(p, 1, t, precision), vars).is_some_and(|b| b <= MAX_SHARED_BYTES))
}

/// Loop-form kernel with one thread per z-line: a first pass accumulates
/// the x and y contributions plane by plane into shared memory, a second
/// adds the z contribution and writes the result.
pub fn generate_lines(cfg: &ElementConfig, vars: LinesVars, opts: &OptionSet) -> Result<KernelIR, CodegenError> {
    opts.validate()?;
    check_config(cfg)?;
    let m = cfg.m();
    let n = cfg.lines_elements_per_block().ok_or_else(|| CodegenError::Block {
        threads: cfg.block_threads,
        reason: format!("lines kernels need a multiple of (p + 1)^2 = {} threads", m * m),
    })?;
    let w = cfg.precision.word_bytes();
    let words = n * m * m * m * vars.total();
    if words * w > MAX_SHARED_BYTES {
        return Err(CodegenError::SharedTooSmall { needed: words * w, available: MAX_SHARED_BYTES });
    }
    let (mi, ni) = (m as i64, n as i64);
    let sw = SOA_WIDTH as i64;
    let ctx = Ctx { vars, slot_stride: ni * mi * mi * mi, var_stride: sw * cfg.n_s() as i64 };

    let mut b = Builder::default();
    let el = b.base("e_l", IndexExpr::Tid.rem(ni));
    let i = b.base("i", IndexExpr::Tid.div(ni).rem(mi));
    let j = b.base("j", IndexExpr::Tid.div(ni * mi).rem(mi));
    let eg = b.base("e_g", IndexExpr::base(el).add(IndexExpr::Bid.mul(ni)));
    let gb = b.base(
        "g",
        IndexExpr::base(eg)
            .div(sw)
            .mul(sw * (cfg.n_s() * NV) as i64)
            .add(IndexExpr::base(eg).rem(sw)),
    );
    let g_own = b.base("g_o", IndexExpr::base(gb).add(IndexExpr::base(i).mul(sw)).add(IndexExpr::base(j).mul(sw * mi)));
    let g_x = b.base("g_x", IndexExpr::base(gb).add(IndexExpr::base(j).mul(sw * mi)));
    let g_y = b.base("g_y", IndexExpr::base(gb).add(IndexExpr::base(i).mul(sw)));
    let s_own = b.base("s_o", IndexExpr::base(el).add(IndexExpr::base(i).mul(ni)).add(IndexExpr::base(j).mul(ni * mi)));
    let s_x = b.base("s_x", IndexExpr::base(el).add(IndexExpr::base(j).mul(ni * mi)));
    let s_y = b.base("s_y", IndexExpr::base(el).add(IndexExpr::base(i).mul(ni)));
    let row_i = b.base("d_i", IndexExpr::base(i).mul(mi));
    let row_j = b.base("d_j", IndexExpr::base(j).mul(mi));
    b.guards.push(Guard { base: eg, limit: Limit::ElementCount });

    let (shared_k, global_k) = (ni * mi * mi, sw * mi * mi);
    let own_at = |k: LoopId| PointAddr {
        shared: (s_own, vec![(k, shared_k)]),
        global: (g_own, vec![(k, global_k)]),
    };
    let n_acc = vars.accumulators();
    let acc_addr = |k: LoopId, q: usize| ctx.shared(&own_at(k), vars.stored() + q);

    // x and y contributions, one plane at a time
    let k = b.loop_begin(m as u32);
    {
        let own = own_at(k);
        let load = |b: &mut Builder, v: usize| ctx.load_var(b, &own, v);
        let mut raw = [None; NV];
        let mut get = |b: &mut Builder, v: usize| *raw[v].get_or_insert_with(|| load(b, v));
        for c in 0..3 {
            if let Some(s) = slot_v(vars, c) {
                let r = get(&mut b, vel(c));
                b.sts(r, ctx.shared(&own, s));
            }
        }
        for c in 0..3 {
            for a in 0..3 {
                if let Some(s) = slot_s(vars, c, a) {
                    let g = get(&mut b, grad(3, c, a));
                    let p = (a == c).then(|| get(&mut b, 0));
                    let r = b.augmented(g, p);
                    b.sts(r, ctx.shared(&own, s));
                }
            }
        }
    }
    b.barrier();
    let acc: Vec<Reg> = (0..n_acc).map(|_| b.zero()).collect();
    let l = b.loop_begin(m as u32);
    let x_pt = PointAddr {
        shared: (s_x, vec![(k, shared_k), (l, ni)]),
        global: (g_x, vec![(k, global_k), (l, sw)]),
    };
    ctx.contribute(&mut b, &acc, Addr::at(row_i, 0).with_loop(l, 1), &x_pt, 0);
    b.loop_end(l);
    let l = b.loop_begin(m as u32);
    let y_pt = PointAddr {
        shared: (s_y, vec![(k, shared_k), (l, ni * mi)]),
        global: (g_y, vec![(k, global_k), (l, sw * mi)]),
    };
    ctx.contribute(&mut b, &acc, Addr::at(row_j, 0).with_loop(l, 1), &y_pt, 1);
    b.loop_end(l);
    for (q, &r) in acc.iter().enumerate() {
        b.sts(r, acc_addr(k, q));
    }
    b.loop_end(k);
    b.barrier();

    // z contribution and output
    let k = b.loop_begin(m as u32);
    let acc: Vec<Reg> = (0..n_acc).map(|q| b.lds(acc_addr(k, q))).collect();
    let l = b.loop_begin(m as u32);
    let z_pt = PointAddr {
        shared: (s_own, vec![(l, shared_k)]),
        global: (g_own, vec![(l, global_k)]),
    };
    ctx.contribute(&mut b, &acc, Addr::fixed(0).with_loop(k, mi).with_loop(l, 1), &z_pt, 2);
    b.loop_end(l);
    let own = own_at(k);
    let mut out = [0; NV];
    for (v, o) in out.iter_mut().enumerate() {
        if let Some(q) = acc_index(vars, v) {
            *o = acc[q];
        }
    }
    if vars != LinesVars::V25 {
        let diag: Vec<Reg> = (0..3).map(|a| out[grad(3, a, a)]).collect();
        let s = b.add(Operand::Reg(diag[0]), Operand::Reg(diag[1]));
        let s = b.add(Operand::Reg(s), Operand::Reg(diag[2]));
        out[0] = b.mul(Operand::Param(Param::NegZetaT), Operand::Reg(s));
    }
    if opts.fuse_source {
        let mut vals = [Reg::MAX; NV];
        for c in 0..3 {
            for a in 0..3 {
                vals[grad(3, c, a)] = ctx.load_var(&mut b, &own, grad(3, c, a));
            }
        }
        b.source(&out, &vals);
    }
    for (v, &r) in out.iter().enumerate() {
        b.stg(r, ctx.global(&own, v));
    }
    b.loop_end(k);

    let d = OperatorMatrix::gauss_legendre(cfg.p).expect("valid order");
    Ok(KernelIR {
        version: IR_VERSION,
        meta: KernelMeta {
            name: format!("lines{}_p{}_{}", vars.total(), cfg.p, cfg.precision),
            cfg: *cfg,
            method: Method::Lines { vars },
            opts: *opts,
            elements_per_block: n,
            shared_words: words,
            shared_bytes: words * w,
            const_table: d.entries,
            shared_pad_words: 0,
        },
        n_regs: b.n_regs(),
        bases: b.bases,
        guards: b.guards,
        instrs: b.instrs,
    })
}

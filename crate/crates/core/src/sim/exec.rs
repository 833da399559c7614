use std::collections::HashMap;

use num_traits::Float;

use super::race::{RaceDetector, SharedAccess};
use super::{KernelParams, SimError, SimGrid, SimReport, Space};
use crate::codegen::{Addr, ConstMode, IndexExpr, Instr, KernelIR, Limit, Operand, Param, Reg};
use crate::memory::{BANK_WIDTH, NUM_BANKS};

const WARP: usize = 32;

#[derive(Clone, Copy)]
enum Src<T> {
    R(usize),
    K(T),
}

struct CAddr {
    base: Option<usize>,
    offset: i64,
    terms: Vec<(usize, i64)>,
}

enum Op<T> {
    Ldg(usize, CAddr),
    Stg(usize, CAddr),
    Lds(usize, CAddr),
    Sts(usize, CAddr),
    Ldc(usize, CAddr, ConstMode),
    Sel(usize, usize, Vec<T>),
    Mov(usize, Src<T>),
    Add(usize, Src<T>, Src<T>),
    Mul(usize, Src<T>, Src<T>),
    Neg(usize, Src<T>),
    Fma(usize, Src<T>, Src<T>, Src<T>),
    Barrier,
    /// Loop slot, trip count, index of the matching end.
    Begin(usize, u32, usize),
    /// Loop slot, index of the matching begin.
    End(usize, usize),
}

/// Maps IR registers onto the fewest physical registers their live ranges
/// allow. Values live across a loop boundary stay live for the whole loop.
fn compact_registers(instrs: &[Instr], loops: &[(usize, usize)]) -> (HashMap<Reg, usize>, usize) {
    let mut span: HashMap<Reg, (usize, usize)> = HashMap::new();
    for (i, ins) in instrs.iter().enumerate() {
        for r in ins.uses().into_iter().chain(ins.def()) {
            let e = span.entry(r).or_insert((i, i));
            e.1 = i;
        }
    }
    // innermost loops first, so extensions propagate outward
    let mut loops = loops.to_vec();
    loops.sort_by_key(|&(b, e)| e - b);
    for &(b, e) in &loops {
        for s in span.values_mut() {
            let inside = s.0 <= e && s.1 >= b;
            let contained = s.0 > b && s.1 < e;
            if inside && !contained {
                s.0 = s.0.min(b);
                s.1 = s.1.max(e);
            }
        }
    }
    let mut order: Vec<(Reg, (usize, usize))> = span.into_iter().collect();
    order.sort_by_key(|&(r, (s, _))| (s, r));
    let mut active: std::collections::BinaryHeap<std::cmp::Reverse<(usize, usize)>> = Default::default();
    let mut free: Vec<usize> = Vec::new();
    let mut map = HashMap::new();
    let mut count = 0;
    for (r, (s, e)) in order {
        while let Some(&std::cmp::Reverse((end, phys))) = active.peek() {
            if end >= s {
                break;
            }
            active.pop();
            free.push(phys);
        }
        let phys = free.pop().unwrap_or_else(|| {
            count += 1;
            count - 1
        });
        map.insert(r, phys);
        active.push(std::cmp::Reverse((e, phys)));
    }
    (map, count)
}

struct Program<T> {
    ops: Vec<Op<T>>,
    n_phys: usize,
    n_loops: usize,
}

fn compile<T: Float>(ir: &KernelIR, params: &KernelParams) -> Result<Program<T>, SimError> {
    let mut loops = Vec::new();
    let mut stack: Vec<(u32, usize)> = Vec::new();
    let mut end_of = HashMap::new();
    let mut slot_of: HashMap<u32, usize> = HashMap::new();
    for (i, ins) in ir.instrs.iter().enumerate() {
        match ins {
            Instr::LoopBegin { id, .. } => stack.push((*id, i)),
            Instr::LoopEnd { id } => match stack.pop() {
                Some((open, b)) if open == *id => {
                    loops.push((b, i));
                    end_of.insert(b, i);
                    let n = slot_of.len();
                    slot_of.entry(*id).or_insert(n);
                }
                _ => return Err(SimError::Malformed { instr: i, reason: "unmatched loop end".into() }),
            },
            _ => {}
        }
    }
    if let Some(&(_, b)) = stack.last() {
        return Err(SimError::Malformed { instr: b, reason: "unterminated loop".into() });
    }
    let (regs, n_phys) = compact_registers(&ir.instrs, &loops);
    let t = |x: f64| T::from(x).expect("finite constant");
    let param = |p: Param| -> T {
        let pp = &params.phys;
        t(match p {
            Param::Zeta => pp.zeta,
            Param::NegNu => -pp.nu,
            Param::NegInvT => -1.0 / pp.t_relax,
            Param::NegJac(a) => -params.jac[a as usize],
            Param::NegZetaT => -pp.zeta * pp.t_relax,
        })
    };
    let src = |o: &Operand| match o {
        Operand::Reg(r) => Src::R(regs[r]),
        Operand::Imm(x) => Src::K(t(*x)),
        Operand::Param(p) => Src::K(param(*p)),
    };
    let n_bases = ir.bases.len();
    let addr = |a: &Addr, i: usize| -> Result<CAddr, SimError> {
        if a.base.is_some_and(|b| b >= n_bases) {
            return Err(SimError::Malformed { instr: i, reason: "unknown base".into() });
        }
        let terms = a
            .loop_terms
            .iter()
            .map(|&(id, c)| {
                slot_of
                    .get(&id)
                    .map(|&s| (s, c))
                    .ok_or_else(|| SimError::Malformed { instr: i, reason: format!("unknown loop {id}") })
            })
            .collect::<Result<_, _>>()?;
        Ok(CAddr { base: a.base, offset: a.offset, terms })
    };
    let mut ops = Vec::with_capacity(ir.instrs.len());
    let mut open: Vec<usize> = Vec::new();
    for (i, ins) in ir.instrs.iter().enumerate() {
        let r = |x: &Reg| regs[x];
        ops.push(match ins {
            Instr::LoadGlobal { dst, addr: a, .. } => Op::Ldg(r(dst), addr(a, i)?),
            Instr::StoreGlobal { src: s, addr: a, .. } => Op::Stg(r(s), addr(a, i)?),
            Instr::LoadShared { dst, addr: a } => Op::Lds(r(dst), addr(a, i)?),
            Instr::StoreShared { src: s, addr: a } => Op::Sts(r(s), addr(a, i)?),
            Instr::LoadConst { dst, addr: a, mode } => Op::Ldc(r(dst), addr(a, i)?, *mode),
            Instr::Select { dst, index, values } => {
                if *index >= n_bases {
                    return Err(SimError::Malformed { instr: i, reason: "unknown base".into() });
                }
                Op::Sel(r(dst), *index, values.iter().map(|&x| t(x)).collect())
            }
            Instr::Mov { dst, src: s } => Op::Mov(r(dst), src(s)),
            Instr::Add { dst, a, b } => Op::Add(r(dst), src(a), src(b)),
            Instr::Mul { dst, a, b } => Op::Mul(r(dst), src(a), src(b)),
            Instr::Neg { dst, a } => Op::Neg(r(dst), src(a)),
            Instr::Fma { dst, a, b, c } => Op::Fma(r(dst), src(a), src(b), src(c)),
            Instr::Barrier => Op::Barrier,
            Instr::LoopBegin { id, count } => {
                open.push(i);
                Op::Begin(slot_of[id], *count, end_of[&i])
            }
            Instr::LoopEnd { id } => Op::End(slot_of[id], open.pop().expect("loops are matched")),
        });
    }
    Ok(Program { ops, n_phys, n_loops: slot_of.len() })
}

/// Serialized and conflict-free transaction counts for one warp access to
/// the shared words `words`.
fn transactions(words: &[usize], word_bytes: usize) -> (usize, usize) {
    let parts = (word_bytes / BANK_WIDTH).max(1);
    let mut bank_words: Vec<usize> = Vec::with_capacity(words.len() * parts);
    for &w in words {
        for p in 0..parts {
            bank_words.push(w * parts + p);
        }
    }
    bank_words.sort_unstable();
    bank_words.dedup();
    let mut per_bank = [0usize; NUM_BANKS];
    for &bw in &bank_words {
        per_bank[bw % NUM_BANKS] += 1;
    }
    (per_bank.iter().copied().max().unwrap_or(0), bank_words.len().div_ceil(NUM_BANKS))
}

/// Execution state of one block.
struct Block<'a, T> {
    prog: &'a Program<T>,
    ir: &'a KernelIR,
    threads: usize,
    /// `regs[(warp * n_phys + r) * 32 + lane]`.
    regs: Vec<T>,
    /// `bases[b * padded_threads + tid]`.
    bases: Vec<i64>,
    active: Vec<bool>,
    shared: Vec<T>,
    input: &'a [T],
    output: &'a mut [T],
    read_seen: &'a mut [u64],
    races: &'a mut RaceDetector,
    report: &'a mut SimReport,
    word_bytes: usize,
    epoch: u32,
    scratch: Vec<usize>,
}

enum Stop {
    Barrier(usize),
    Done,
}

impl<T: Float> Block<'_, T> {
    fn padded(&self) -> usize {
        self.active.len()
    }

    #[inline]
    fn val(&self, base: usize, s: Src<T>, lane: usize) -> T {
        match s {
            Src::R(r) => self.regs[base + r * WARP + lane],
            Src::K(k) => k,
        }
    }

    fn lane_addr(&self, a: &CAddr, tid: usize, loops: &[i64]) -> i64 {
        let mut x = a.offset + a.terms.iter().map(|&(s, c)| c * loops[s]).sum::<i64>();
        if let Some(b) = a.base {
            x += self.bases[b * self.padded() + tid];
        }
        x
    }

    fn sectors(&mut self, lanes: usize) -> usize {
        let s = &mut self.scratch[..lanes];
        s.sort_unstable();
        let mut n = 0;
        for i in 0..s.len() {
            if i == 0 || s[i] != s[i - 1] {
                n += 1;
            }
        }
        n
    }

    fn oob(&self, instr: usize, space: Space, addr: i64) -> SimError {
        SimError::OutOfBounds { instr, space, addr }
    }

    /// Runs warp `w` from `pc` to the next barrier or the end.
    fn run_warp(&mut self, w: usize, mut pc: usize, loops: &mut [i64]) -> Result<Stop, SimError> {
        let prog = self.prog;
        let np = prog.n_phys;
        let rbase = w * np * WARP;
        let t0 = w * WARP;
        while pc < prog.ops.len() {
            let op = &prog.ops[pc];
            match op {
                Op::Barrier => return Ok(Stop::Barrier(pc)),
                Op::Begin(slot, count, end) => {
                    if *count == 0 {
                        pc = *end + 1;
                        continue;
                    }
                    loops[*slot] = 0;
                }
                Op::End(slot, begin) => {
                    let Op::Begin(_, count, _) = prog.ops[*begin] else { unreachable!() };
                    loops[*slot] += 1;
                    if (loops[*slot] as u32) < count {
                        pc = *begin + 1;
                        continue;
                    }
                }
                Op::Mov(d, a) => {
                    for l in 0..WARP {
                        self.regs[rbase + d * WARP + l] = self.val(rbase, *a, l);
                    }
                    self.report.arithmetic_issues += 1;
                }
                Op::Add(d, a, b) => {
                    for l in 0..WARP {
                        self.regs[rbase + d * WARP + l] = self.val(rbase, *a, l) + self.val(rbase, *b, l);
                    }
                    self.report.arithmetic_issues += 1;
                }
                Op::Mul(d, a, b) => {
                    for l in 0..WARP {
                        self.regs[rbase + d * WARP + l] = self.val(rbase, *a, l) * self.val(rbase, *b, l);
                    }
                    self.report.arithmetic_issues += 1;
                }
                Op::Neg(d, a) => {
                    for l in 0..WARP {
                        self.regs[rbase + d * WARP + l] = -self.val(rbase, *a, l);
                    }
                    self.report.arithmetic_issues += 1;
                }
                Op::Fma(d, a, b, c) => {
                    for l in 0..WARP {
                        let x = self.val(rbase, *a, l).mul_add(self.val(rbase, *b, l), self.val(rbase, *c, l));
                        self.regs[rbase + d * WARP + l] = x;
                    }
                    self.report.arithmetic_issues += 1;
                }
                Op::Sel(d, index, values) => {
                    for l in 0..WARP {
                        let tid = t0 + l;
                        if tid >= self.threads {
                            continue;
                        }
                        let k = self.bases[index * self.padded() + tid];
                        let v = *values.get(k as usize).ok_or(SimError::OutOfBounds {
                            instr: pc,
                            space: Space::Constant,
                            addr: k,
                        })?;
                        self.regs[rbase + d * WARP + l] = v;
                    }
                    self.report.arithmetic_issues += 1;
                }
                Op::Ldc(d, a, mode) => {
                    let table = &self.ir.meta.const_table;
                    let n = table.len() as i64;
                    for l in 0..WARP {
                        let tid = t0 + l;
                        if tid >= self.threads {
                            continue;
                        }
                        let x = self.lane_addr(a, tid, loops);
                        let (idx, neg) = match mode {
                            ConstMode::Plain => (x, false),
                            ConstMode::Negated => (x, true),
                            ConstMode::SignedIndex if x >= n => (x - n, true),
                            ConstMode::SignedIndex => (x, false),
                        };
                        if idx < 0 || idx >= n {
                            return Err(self.oob(pc, Space::Constant, x));
                        }
                        let v = T::from(table[idx as usize]).expect("finite constant");
                        self.regs[rbase + d * WARP + l] = if neg { -v } else { v };
                    }
                }
                Op::Ldg(d, a) | Op::Stg(d, a) => {
                    let load = matches!(op, Op::Ldg(..));
                    let len = if load { self.input.len() } else { self.output.len() } as i64;
                    let mut lanes = 0;
                    for l in 0..WARP {
                        let tid = t0 + l;
                        if !self.active[tid] {
                            continue;
                        }
                        let x = self.lane_addr(a, tid, loops);
                        if x < 0 || x >= len {
                            return Err(self.oob(pc, Space::Global, x));
                        }
                        let x = x as usize;
                        if load {
                            self.regs[rbase + d * WARP + l] = self.input[x];
                            let (word, bit) = (x / 64, 1u64 << (x % 64));
                            if self.read_seen[word] & bit == 0 {
                                self.read_seen[word] |= bit;
                                self.report.global_read_distinct_words += 1;
                            }
                        } else {
                            self.output[x] = self.regs[rbase + d * WARP + l];
                        }
                        self.scratch[lanes] = x * self.word_bytes / 32;
                        lanes += 1;
                    }
                    let sectors = self.sectors(lanes);
                    if load {
                        self.report.global_read_words += lanes as u64;
                        self.report.global_read_sectors += sectors as u64;
                    } else {
                        self.report.global_write_words += lanes as u64;
                        self.report.global_write_sectors += sectors as u64;
                    }
                }
                Op::Lds(d, a) | Op::Sts(d, a) => {
                    let load = matches!(op, Op::Lds(..));
                    let len = self.shared.len() as i64;
                    let mut lanes = 0;
                    for l in 0..WARP {
                        let tid = t0 + l;
                        if !self.active[tid] {
                            continue;
                        }
                        let x = self.lane_addr(a, tid, loops);
                        if x < 0 || x >= len {
                            return Err(self.oob(pc, Space::Shared, x));
                        }
                        let x = x as usize;
                        if load {
                            self.regs[rbase + d * WARP + l] = self.shared[x];
                        } else {
                            self.shared[x] = self.regs[rbase + d * WARP + l];
                        }
                        self.races.access(SharedAccess {
                            word: x,
                            thread: tid as u32,
                            epoch: self.epoch,
                            instr: pc as u32,
                            write: !load,
                        });
                        self.scratch[lanes] = x;
                        lanes += 1;
                    }
                    if lanes > 0 {
                        let (count, ideal) = transactions(&self.scratch[..lanes], self.word_bytes);
                        self.report.shared_transactions += count as u64;
                        self.report.bank_conflict_extra_transactions += (count - ideal) as u64;
                    }
                    if load {
                        self.report.shared_read_words += lanes as u64;
                    } else {
                        self.report.shared_write_words += lanes as u64;
                    }
                }
            }
            pc += 1;
        }
        Ok(Stop::Done)
    }

    fn run(&mut self) -> Result<(), SimError> {
        let warps = self.padded() / WARP;
        let mut pcs = vec![0usize; warps];
        let mut loops = vec![vec![0i64; self.prog.n_loops]; warps];
        let mut done = vec![false; warps];
        loop {
            let mut at: Vec<Option<usize>> = Vec::with_capacity(warps);
            for w in 0..warps {
                if done[w] {
                    at.push(None);
                    continue;
                }
                match self.run_warp(w, pcs[w], &mut loops[w])? {
                    Stop::Barrier(pc) => at.push(Some(pc)),
                    Stop::Done => {
                        done[w] = true;
                        at.push(None);
                    }
                }
            }
            let waiting: Vec<usize> = at.iter().flatten().copied().collect();
            if waiting.is_empty() {
                return Ok(());
            }
            if waiting.len() != warps || waiting.iter().any(|&pc| pc != waiting[0]) {
                return Err(SimError::BarrierDivergence { instr: waiting[0] });
            }
            for (w, pc) in pcs.iter_mut().enumerate() {
                *pc = waiting[w] + 1;
            }
            self.epoch += 1;
        }
    }
}

/// Runs every block of the grid; inputs and outputs are in kernel
/// precision, in the global AoSoA layout.
pub(super) fn run_grid<T: Float>(
    ir: &KernelIR,
    grid: &SimGrid,
    params: &KernelParams,
    input: &[T],
    output: &mut [T],
) -> Result<SimReport, SimError> {
    let prog = compile::<T>(ir, params)?;
    let threads = grid.threads_per_block;
    let padded = threads.div_ceil(WARP) * WARP;
    let shared_words = grid.shared_bytes / ir.meta.cfg.precision.word_bytes();
    let mut report = SimReport::default();
    let mut read_seen = vec![0u64; input.len().div_ceil(64)];
    let mut races = RaceDetector::new(shared_words);
    let mut regs = vec![T::zero(); padded * prog.n_phys];
    let mut shared = vec![T::zero(); shared_words];
    let mut bases = vec![0i64; ir.bases.len() * padded];
    let mut active = vec![false; padded];
    let mut race_total = 0;
    for bid in 0..grid.blocks {
        races.reset(bid);
        regs.iter_mut().for_each(|r| *r = T::zero());
        shared.iter_mut().for_each(|s| *s = T::zero());
        let mut vals = vec![0i64; ir.bases.len()];
        for tid in 0..padded {
            for (b, base) in ir.bases.iter().enumerate() {
                vals[b] = eval_base(&base.expr, tid as i64, bid as i64, &vals);
                bases[b * padded + tid] = vals[b];
            }
            active[tid] = tid < threads
                && ir.guards.iter().all(|g| {
                    let limit = match g.limit {
                        Limit::Const(c) => c,
                        Limit::ElementCount => grid.n_elem as i64,
                    };
                    vals[g.base] < limit
                });
        }
        let mut block = Block {
            prog: &prog,
            ir,
            threads,
            regs: std::mem::take(&mut regs),
            bases: std::mem::take(&mut bases),
            active: std::mem::take(&mut active),
            shared: std::mem::take(&mut shared),
            input,
            output: &mut *output,
            read_seen: &mut read_seen,
            races: &mut races,
            report: &mut report,
            word_bytes: ir.meta.cfg.precision.word_bytes(),
            epoch: 0,
            scratch: vec![0; WARP],
        };
        let res = block.run();
        regs = block.regs;
        bases = block.bases;
        active = block.active;
        shared = block.shared;
        res?;
        race_total = races.total();
    }
    report.race_count = race_total;
    report.race_flags = races.into_flags();
    Ok(report)
}

fn eval_base(e: &IndexExpr, tid: i64, bid: i64, bases: &[i64]) -> i64 {
    let ev = |x: &IndexExpr| eval_base(x, tid, bid, bases);
    match e {
        IndexExpr::Tid => tid,
        IndexExpr::Bid => bid,
        IndexExpr::Const(c) => *c,
        IndexExpr::Base(b) => bases[*b],
        IndexExpr::Add(a, b) => ev(a) + ev(b),
        IndexExpr::Mul(a, c) => ev(a) * c,
        IndexExpr::Div(a, c) => ev(a).div_euclid(*c),
        IndexExpr::Mod(a, c) => ev(a).rem_euclid(*c),
        // out-of-range lookups only occur on lanes that never touch memory
        IndexExpr::Lookup(t, i) => usize::try_from(ev(i)).ok().and_then(|i| t.get(i)).copied().unwrap_or(0),
    }
}

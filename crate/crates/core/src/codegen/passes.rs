use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::graph::{graph_of, DependencyGraph};
use super::ir::{Addr, Category, Instr, KernelIR, LoadHint, StoreHint};

fn reordered(ir: &KernelIR, order: Vec<usize>) -> KernelIR {
    debug_assert_eq!(order.len(), ir.instrs.len());
    KernelIR { instrs: order.into_iter().map(|i| ir.instrs[i].clone()).collect(), ..ir.clone() }
}

/// Hoists every compute instruction to just after the last memory
/// instruction or wall it depends on; memory instructions keep their order.
pub fn pass_interleave_asap(ir: &KernelIR) -> KernelIR {
    let g = graph_of(&ir.instrs);
    let n = ir.instrs.len();
    let mut anchor = vec![-1i64; n];
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        if g.categories[i] == Category::Compute {
            let a = g.preds[i]
                .iter()
                .map(|&(p, _)| if g.categories[p] == Category::Compute { anchor[p] } else { p as i64 })
                .max()
                .unwrap_or(-1);
            anchor[i] = a;
            groups.entry(a).or_default().push(i);
        }
    }
    let mut order = Vec::with_capacity(n);
    order.extend(groups.remove(&-1).unwrap_or_default());
    for i in 0..n {
        if g.categories[i] != Category::Compute {
            order.push(i);
            order.extend(groups.remove(&(i as i64)).unwrap_or_default());
        }
    }
    reordered(ir, order)
}

pub fn pass_agglomerate(ir: &KernelIR) -> KernelIR {
    pass_agglomerate_with(ir, 13, None)
}

/// Regroups each segment between walls into alternating memory and compute
/// blocks of at least `min_block` instructions where dependencies permit,
/// splitting blocks longer than `max_block`. Memory instructions move only
/// as far as the dependency graph allows.
pub fn pass_agglomerate_with(ir: &KernelIR, min_block: usize, max_block: Option<usize>) -> KernelIR {
    let g = graph_of(&ir.instrs);
    let n = ir.instrs.len();
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, ps) in g.preds.iter().enumerate() {
        for &(p, _) in ps {
            succs[p].push(i);
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..=n {
        if i == n || g.categories[i] == Category::Wall {
            if start < i {
                Segment::new(&g, &succs, start, i).schedule(min_block.max(1), max_block, &mut order);
            }
            if i < n {
                order.push(i);
            }
            start = i + 1;
        }
    }
    reordered(ir, order)
}

fn slot(cat: Category) -> usize {
    usize::from(cat == Category::Compute)
}

struct Segment<'a> {
    g: &'a DependencyGraph,
    succs: &'a [Vec<usize>],
    start: usize,
    end: usize,
    /// Unscheduled in-segment predecessors.
    indeg: Vec<usize>,
    /// Ready instructions per category, memory first.
    ready: [BTreeSet<usize>; 2],
    /// Unscheduled instructions per category.
    left: [usize; 2],
}

impl<'a> Segment<'a> {
    fn new(g: &'a DependencyGraph, succs: &'a [Vec<usize>], start: usize, end: usize) -> Self {
        let indeg: Vec<usize> =
            (start..end).map(|i| g.preds[i].iter().filter(|&&(p, _)| p >= start).count()).collect();
        let mut ready: [BTreeSet<usize>; 2] = Default::default();
        let mut left = [0; 2];
        for i in start..end {
            let c = slot(g.categories[i]);
            left[c] += 1;
            if indeg[i - start] == 0 {
                ready[c].insert(i);
            }
        }
        Self { g, succs, start, end, indeg, ready, left }
    }

    fn in_seg(&self, i: usize) -> bool {
        i >= self.start && i < self.end
    }

    fn has_ready(&self, cat: Category) -> bool {
        !self.ready[slot(cat)].is_empty()
    }

    /// Whether at least `want` instructions of `cat` could run back to back
    /// from the current state.
    fn available(&self, cat: Category, want: usize) -> bool {
        let mut dec: HashMap<usize, usize> = HashMap::new();
        let mut queue: Vec<usize> = self.ready[slot(cat)].iter().copied().collect();
        let mut count = 0;
        while let Some(c) = queue.pop() {
            count += 1;
            if count >= want {
                break;
            }
            for &s in &self.succs[c] {
                if self.in_seg(s) && self.g.categories[s] == cat {
                    let d = dec.entry(s).or_default();
                    *d += 1;
                    if self.indeg[s - self.start] == *d {
                        queue.push(s);
                    }
                }
            }
        }
        count >= want
    }

    fn emit(&mut self, cat: Category, order: &mut Vec<usize>) {
        let c = slot(cat);
        self.left[c] -= 1;
        let i = self.ready[c].pop_first().expect("an instruction is ready");
        order.push(i);
        for &s in &self.succs[i] {
            if self.in_seg(s) {
                self.indeg[s - self.start] -= 1;
                if self.indeg[s - self.start] == 0 {
                    self.ready[slot(self.g.categories[s])].insert(s);
                }
            }
        }
    }

    fn schedule(mut self, min_block: usize, max_block: Option<usize>, order: &mut Vec<usize>) {
        let other = |c: Category| if c == Category::Memory { Category::Compute } else { Category::Memory };
        let mut cur = if self.has_ready(Category::Memory) { Category::Memory } else { Category::Compute };
        let mut len = 0;
        for _ in self.start..self.end {
            let switch = if !self.has_ready(cur) {
                true
            } else if max_block.is_some_and(|mx| len >= mx) {
                self.has_ready(other(cur))
            } else {
                // never strand a tail shorter than a block
                let left = self.left[slot(cur)];
                len >= min_block && left >= min_block && self.available(other(cur), min_block)
            };
            if switch {
                cur = other(cur);
                len = 0;
            }
            self.emit(cur, order);
            len += 1;
        }
    }
}

/// Runs of memory and compute instructions, `(category, length)`; walls end
/// a run and appear as runs of their own.
pub fn block_structure(instrs: &[Instr]) -> Vec<(Category, usize)> {
    let mut out: Vec<(Category, usize)> = Vec::new();
    for ins in instrs {
        let c = ins.category();
        match out.last_mut() {
            Some((last, len)) if *last == c && c != Category::Wall => *len += 1,
            _ => out.push((c, 1)),
        }
    }
    out
}

/// Marks stores write-through and each global load `lu` when it is the last
/// load of its address.
pub fn pass_apply_hints(ir: &KernelIR) -> KernelIR {
    let mut out = ir.clone();
    apply_hints(&mut out, true, true);
    out
}

pub fn apply_hints(ir: &mut KernelIR, loads: bool, stores: bool) {
    let mut last: HashMap<Addr, usize> = HashMap::new();
    if loads {
        for (i, ins) in ir.instrs.iter().enumerate() {
            if let Instr::LoadGlobal { addr, .. } = ins {
                last.insert(addr.clone(), i);
            }
        }
    }
    for (i, ins) in ir.instrs.iter_mut().enumerate() {
        match ins {
            Instr::LoadGlobal { addr, hint, .. } if loads => {
                *hint = if last[addr] == i { LoadHint::Lu } else { LoadHint::Default };
            }
            Instr::StoreGlobal { hint, .. } if stores => *hint = StoreHint::Wt,
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::ir::{Operand, Reg};
    use super::super::options::{Method, OptionSet};
    use super::super::ir::{KernelMeta, IR_VERSION};
    use super::*;
    use crate::fr::{ElementConfig, Precision};

    fn wrap(instrs: Vec<Instr>) -> KernelIR {
        KernelIR {
            version: IR_VERSION,
            meta: KernelMeta {
                name: "t".into(),
                cfg: ElementConfig::new(1, 1, 32, Precision::Fp32),
                method: Method::PlanarUnmanaged,
                opts: OptionSet::none(),
                elements_per_block: 1,
                shared_words: 64,
                shared_bytes: 256,
                const_table: vec![],
                shared_pad_words: 0,
            },
            bases: vec![],
            guards: vec![],
            n_regs: 64,
            instrs,
        }
    }

    fn ldg(dst: Reg, off: i64) -> Instr {
        Instr::LoadGlobal { dst, addr: Addr::fixed(off), hint: LoadHint::Default }
    }

    fn mul(dst: Reg, a: Reg, b: Reg) -> Instr {
        Instr::Mul { dst, a: Operand::Reg(a), b: Operand::Reg(b) }
    }

    #[test]
    fn asap_hoists_trailing_compute() {
        let ir = wrap(vec![ldg(0, 0), ldg(1, 1), ldg(2, 2), ldg(3, 3), mul(4, 0, 1)]);
        let out = pass_interleave_asap(&ir);
        assert_eq!(out.instrs[2], mul(4, 0, 1));
        assert_eq!(pass_interleave_asap(&out), out);
    }

    #[test]
    fn hints_follow_last_use() {
        let st = Instr::StoreGlobal { src: 0, addr: Addr::fixed(9), hint: StoreHint::Default };
        let ir = wrap(vec![ldg(0, 5), ldg(1, 7), ldg(2, 5), ldg(3, 5), st]);
        let out = pass_apply_hints(&ir);
        let hints: Vec<_> = out
            .instrs
            .iter()
            .filter_map(|i| match i {
                Instr::LoadGlobal { hint, .. } => Some(*hint),
                _ => None,
            })
            .collect();
        assert_eq!(hints, vec![LoadHint::Default, LoadHint::Lu, LoadHint::Default, LoadHint::Lu]);
        assert!(matches!(out.instrs[4], Instr::StoreGlobal { hint: StoreHint::Wt, .. }));
    }

    #[test]
    fn agglomerate_keeps_large_blocks() {
        let mut instrs: Vec<Instr> = (0..13).map(|i| ldg(i, i as i64)).collect();
        instrs.extend((0..13).map(|i| mul(20 + i, i, i)));
        let ir = wrap(instrs);
        let out = pass_agglomerate(&ir);
        assert_eq!(out, ir);
        assert_eq!(block_structure(&out.instrs), vec![(Category::Memory, 13), (Category::Compute, 13)]);
    }

    #[test]
    fn agglomerate_groups_alternating_code() {
        let mut instrs = Vec::new();
        for i in 0..40 {
            instrs.push(ldg(i, i as i64));
            instrs.push(mul(100 + i, i, i));
        }
        let out = pass_agglomerate(&wrap(instrs));
        let blocks = block_structure(&out.instrs);
        assert!(blocks[1..blocks.len() - 1].iter().all(|&(_, len)| len >= 13), "{blocks:?}");
        let split = pass_agglomerate_with(&out, 4, Some(5));
        assert!(block_structure(&split.instrs).iter().all(|&(_, len)| len <= 5));
    }
}

use std::collections::HashMap;

use super::ir::{Addr, Category, Instr, KernelIR, Reg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Read after write.
    Data,
    /// Write after read.
    Anti,
    /// Write after write.
    Output,
    /// Possibly overlapping shared accesses.
    Memory,
    /// Ordering against a barrier or loop marker.
    Wall,
}

/// Dependencies between instructions; every edge points forward in program
/// order, so the graph is acyclic by construction.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    pub categories: Vec<Category>,
    /// Sorted, deduplicated predecessors of each instruction.
    pub preds: Vec<Vec<(usize, EdgeKind)>>,
}

impl DependencyGraph {
    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.preds[to].iter().any(|&(p, _)| p == from)
    }

    /// Whether `to` transitively depends on `from`.
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        if from >= to {
            return from == to;
        }
        let mut seen = vec![false; to + 1];
        let mut stack = vec![to];
        while let Some(n) = stack.pop() {
            for &(p, _) in &self.preds[n] {
                if p == from {
                    return true;
                }
                if p > from && !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        false
    }

    pub fn is_acyclic(&self) -> bool {
        self.preds.iter().enumerate().all(|(i, ps)| ps.iter().all(|&(p, _)| p < i))
    }

    pub fn edge_count(&self) -> usize {
        self.preds.iter().map(Vec::len).sum()
    }
}

fn may_alias(a: &Addr, b: &Addr) -> bool {
    if a.base == b.base && a.loop_terms == b.loop_terms {
        a.offset == b.offset
    } else {
        true
    }
}

#[derive(Default)]
struct RegState {
    def: Option<usize>,
    accs: Vec<usize>,
    readers: Vec<usize>,
}

pub fn build_dependency_graph(ir: &KernelIR) -> DependencyGraph {
    graph_of(&ir.instrs)
}

pub(crate) fn graph_of(instrs: &[Instr]) -> DependencyGraph {
    let n = instrs.len();
    let mut preds: Vec<Vec<(usize, EdgeKind)>> = vec![Vec::new(); n];
    let mut regs: HashMap<Reg, RegState> = HashMap::new();
    let mut wall: Option<usize> = None;
    let mut segment: Vec<usize> = Vec::new();
    let mut shared_loads: Vec<usize> = Vec::new();
    let mut shared_stores: Vec<usize> = Vec::new();
    let shared_addr = |i: usize| match &instrs[i] {
        Instr::LoadShared { addr, .. } | Instr::StoreShared { addr, .. } => addr,
        _ => unreachable!("only shared accesses are tracked"),
    };

    for (i, ins) in instrs.iter().enumerate() {
        let e = &mut preds[i];
        if ins.category() == Category::Wall {
            e.extend(segment.iter().map(|&s| (s, EdgeKind::Wall)));
            e.extend(wall.map(|w| (w, EdgeKind::Wall)));
            wall = Some(i);
            segment.clear();
            shared_loads.clear();
            shared_stores.clear();
            continue;
        }
        e.extend(wall.map(|w| (w, EdgeKind::Wall)));
        segment.push(i);

        let acc = ins.accumulates();
        for u in ins.uses() {
            if Some(u) == acc {
                continue;
            }
            let st = regs.entry(u).or_default();
            e.extend(st.def.map(|d| (d, EdgeKind::Data)));
            e.extend(st.accs.iter().map(|&a| (a, EdgeKind::Data)));
            st.readers.push(i);
        }
        if let Some(r) = acc {
            let st = regs.entry(r).or_default();
            e.extend(st.def.map(|d| (d, EdgeKind::Data)));
            e.extend(st.readers.iter().filter(|&&x| x != i).map(|&x| (x, EdgeKind::Anti)));
            st.accs.push(i);
        } else if let Some(r) = ins.def() {
            let st = regs.entry(r).or_default();
            e.extend(st.def.map(|d| (d, EdgeKind::Output)));
            e.extend(st.accs.iter().map(|&a| (a, EdgeKind::Output)));
            e.extend(st.readers.iter().filter(|&&x| x != i).map(|&x| (x, EdgeKind::Anti)));
            *st = RegState { def: Some(i), accs: Vec::new(), readers: Vec::new() };
        }

        match ins {
            Instr::LoadShared { addr, .. } => {
                e.extend(
                    shared_stores.iter().filter(|&&s| may_alias(shared_addr(s), addr)).map(|&s| (s, EdgeKind::Memory)),
                );
                shared_loads.push(i);
            }
            Instr::StoreShared { addr, .. } => {
                e.extend(
                    shared_stores
                        .iter()
                        .chain(&shared_loads)
                        .filter(|&&s| may_alias(shared_addr(s), addr))
                        .map(|&s| (s, EdgeKind::Memory)),
                );
                shared_stores.push(i);
            }
            _ => {}
        }
        e.sort_unstable_by_key(|&(p, k)| (p, k as u8));
        e.dedup_by_key(|x| x.0);
    }
    DependencyGraph { categories: instrs.iter().map(Instr::category).collect(), preds }
}

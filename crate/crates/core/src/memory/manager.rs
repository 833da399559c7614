use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ManagerError;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    Low,
    Medium,
    High,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::Low, Priority::Medium, Priority::High];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Register,
    Shared,
    Global,
    Constant,
}

/// Where a variable can be read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub space: Space,
    pub slot: usize,
    pub per_thread: bool,
    /// Byte offset of the slot's first word, for shared slots.
    pub byte_offset: Option<usize>,
}

/// Dedicated registers that stage global data on its way into shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineRegister {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub var: VarId,
    pub slot: usize,
}

/// Shared memory split into a free stack and three priority stacks. Every
/// slot spans one word for each thread of the block.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedPartitions {
    pub capacity_bytes: usize,
    pub slot_bytes: usize,
    /// Free slot indices; the top is the next slot handed out.
    pub free: Vec<usize>,
    /// Indexed by [`Priority`].
    pub stacks: [Vec<SlotRecord>; 3],
}

impl SharedPartitions {
    fn new(capacity_bytes: usize, slot_bytes: usize) -> Self {
        let slots = capacity_bytes / slot_bytes;
        Self { capacity_bytes, slot_bytes, free: (0..slots).rev().collect(), stacks: Default::default() }
    }

    pub fn slots(&self) -> usize {
        self.capacity_bytes / self.slot_bytes
    }

    pub fn used(&self) -> usize {
        self.stacks.iter().map(Vec::len).sum()
    }

    fn find(&self, var: VarId) -> Option<(Priority, usize)> {
        Priority::ALL
            .iter()
            .find_map(|&p| self.stacks[p.index()].iter().position(|r| r.var == var).map(|i| (p, i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum LogEvent {
    Request { var: VarId, priority: Priority, location: Location },
    /// Global value copied into a shared slot through a line register.
    Cache { var: VarId, slot: usize, via: LineRegister },
    Evict { var: VarId, slot: usize, priority: Priority },
    Reprioritise { var: VarId, from: Priority, to: Priority },
    Release { var: VarId, slot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Home {
    Global,
    Register(usize),
}

/// Generation-time placement of variables across registers, shared memory
/// and global memory.
#[derive(Debug, Clone)]
pub struct ManagerState {
    homes: BTreeMap<VarId, Home>,
    line_registers: BTreeMap<LineRegister, usize>,
    partitions: SharedPartitions,
    log: Vec<LogEvent>,
}

impl ManagerState {
    /// A manager for `capacity_bytes` of shared memory where a variable needs
    /// one `word_bytes` word per thread of a `threads`-wide block.
    pub fn new(capacity_bytes: usize, threads: usize, word_bytes: usize) -> Self {
        let mut line_registers = BTreeMap::new();
        line_registers.insert(LineRegister::X, 0);
        line_registers.insert(LineRegister::Y, 1);
        Self {
            homes: BTreeMap::new(),
            line_registers,
            partitions: SharedPartitions::new(capacity_bytes, threads * word_bytes),
            log: Vec::new(),
        }
    }

    pub fn declare_global(&mut self, var: VarId) {
        self.homes.insert(var, Home::Global);
    }

    pub fn declare_register(&mut self, var: VarId, reg: usize) {
        self.homes.insert(var, Home::Register(reg));
    }

    pub fn line_register(&self, which: LineRegister) -> usize {
        self.line_registers[&which]
    }

    pub fn partitions(&self) -> &SharedPartitions {
        &self.partitions
    }

    pub fn log(&self) -> &[LogEvent] {
        &self.log
    }

    /// Shared slot holding `var`, without touching its priority.
    pub fn shared_slot(&self, var: VarId) -> Option<usize> {
        self.partitions.find(var).map(|(p, i)| self.partitions.stacks[p.index()][i].slot)
    }

    pub fn priority_of(&self, var: VarId) -> Option<Priority> {
        self.partitions.find(var).map(|(p, _)| p)
    }

    fn shared_location(&self, slot: usize) -> Location {
        Location {
            space: Space::Shared,
            slot,
            per_thread: true,
            byte_offset: Some(slot * self.partitions.slot_bytes),
        }
    }

    /// Best location of `var`, caching it into shared through the x register
    /// when it is not resident anywhere faster.
    pub fn request(&mut self, var: VarId, priority: Priority) -> Result<Location, ManagerError> {
        self.request_via(var, priority, LineRegister::X)
    }

    pub fn request_via(
        &mut self,
        var: VarId,
        priority: Priority,
        via: LineRegister,
    ) -> Result<Location, ManagerError> {
        let home = *self.homes.get(&var).ok_or(ManagerError::UnknownVariable(var))?;
        let loc = self.place(var, priority, via, home);
        self.log.push(LogEvent::Request { var, priority, location: loc });
        Ok(loc)
    }

    fn place(&mut self, var: VarId, priority: Priority, via: LineRegister, home: Home) -> Location {
        if let Home::Register(reg) = home {
            return Location { space: Space::Register, slot: reg, per_thread: true, byte_offset: None };
        }
        if let Some((current, idx)) = self.partitions.find(var) {
            let slot = self.partitions.stacks[current.index()][idx].slot;
            if priority > current {
                self.move_record(var, current, idx, priority);
            }
            return self.shared_location(slot);
        }
        if self.partitions.free.is_empty() {
            // only strictly lower priorities give way, lowest stack first
            let victim = Priority::ALL
                .iter()
                .take_while(|&&p| p < priority)
                .find(|p| !self.partitions.stacks[p.index()].is_empty())
                .copied();
            let Some(victim) = victim else {
                return Location { space: Space::Global, slot: var, per_thread: false, byte_offset: None };
            };
            let rec = self.partitions.stacks[victim.index()].pop().expect("stack is nonempty");
            self.log.push(LogEvent::Evict { var: rec.var, slot: rec.slot, priority: victim });
            self.partitions.free.push(rec.slot);
        }
        let slot = self.partitions.free.pop().expect("a slot was freed");
        self.partitions.stacks[priority.index()].push(SlotRecord { var, slot });
        self.log.push(LogEvent::Cache { var, slot, via });
        self.shared_location(slot)
    }

    fn move_record(&mut self, var: VarId, from: Priority, idx: usize, to: Priority) {
        let rec = self.partitions.stacks[from.index()].remove(idx);
        self.partitions.stacks[to.index()].push(rec);
        self.log.push(LogEvent::Reprioritise { var, from, to });
    }

    fn reprioritise(&mut self, var: VarId, to: Priority, raise: bool) -> Result<(), ManagerError> {
        let (from, idx) = self.partitions.find(var).ok_or(ManagerError::NotShared(var))?;
        if from == to {
            return Ok(());
        }
        if (to > from) != raise {
            return Err(ManagerError::Direction { var, from, to });
        }
        self.move_record(var, from, idx, to);
        Ok(())
    }

    pub fn escalate(&mut self, var: VarId, to: Priority) -> Result<(), ManagerError> {
        self.reprioritise(var, to, true)
    }

    pub fn deescalate(&mut self, var: VarId, to: Priority) -> Result<(), ManagerError> {
        self.reprioritise(var, to, false)
    }

    /// Drops `var` from shared, returning its slot to the free stack.
    pub fn release(&mut self, var: VarId) -> Result<(), ManagerError> {
        let (p, idx) = self.partitions.find(var).ok_or(ManagerError::NotShared(var))?;
        let rec = self.partitions.stacks[p.index()].remove(idx);
        self.partitions.free.push(rec.slot);
        self.log.push(LogEvent::Release { var, slot: rec.slot });
        Ok(())
    }

    /// The log as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for ev in &self.log {
            let _ = writeln!(out, "{}", serde_json::to_string(ev).expect("log events serialize"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two slots of four threads of fp32.
    fn small() -> ManagerState {
        let mut m = ManagerState::new(32, 4, 4);
        for v in 0..10 {
            m.declare_global(v);
        }
        m.declare_register(100, 7);
        m
    }

    #[test]
    fn register_resident_wins() {
        let mut m = small();
        let loc = m.request(100, Priority::High).unwrap();
        assert_eq!(loc.space, Space::Register);
        assert_eq!(loc.slot, 7);
        assert_eq!(m.partitions().used(), 0);
        assert_eq!(m.request(55, Priority::Low), Err(ManagerError::UnknownVariable(55)));
    }

    #[test]
    fn high_request_evicts_low() {
        let mut m = small();
        m.request(0, Priority::Low).unwrap();
        m.request(1, Priority::Low).unwrap();
        let loc = m.request(2, Priority::High).unwrap();
        assert_eq!(loc.space, Space::Shared);
        assert_eq!(m.priority_of(1), None);
        assert_eq!(m.priority_of(0), Some(Priority::Low));
        assert_eq!(m.partitions().stacks[2].len(), 1);
    }

    #[test]
    fn full_of_high_falls_back_to_global() {
        let mut m = small();
        m.request(0, Priority::High).unwrap();
        m.request(1, Priority::High).unwrap();
        assert_eq!(m.request(2, Priority::Low).unwrap().space, Space::Global);
        assert_eq!(m.request(3, Priority::High).unwrap().space, Space::Global);
        assert_eq!(m.partitions().used(), 2);
    }

    #[test]
    fn priority_changes() {
        let mut m = small();
        m.request(0, Priority::Low).unwrap();
        m.escalate(0, Priority::High).unwrap();
        m.request(1, Priority::Medium).unwrap();
        m.request(2, Priority::Medium).unwrap();
        assert_eq!(m.priority_of(0), Some(Priority::High));

        let mut m = small();
        m.request(0, Priority::High).unwrap();
        m.request(1, Priority::High).unwrap();
        m.deescalate(0, Priority::Low).unwrap();
        m.request(2, Priority::High).unwrap();
        assert_eq!(m.priority_of(0), None);

        let before = m.log().len();
        m.escalate(1, Priority::High).unwrap();
        assert_eq!(m.log().len(), before);
        assert_eq!(m.escalate(9, Priority::High), Err(ManagerError::NotShared(9)));
        assert!(matches!(m.escalate(2, Priority::Low), Err(ManagerError::Direction { .. })));
    }

    #[test]
    fn trace_lines_parse() {
        let mut m = small();
        m.request(0, Priority::Low).unwrap();
        m.request_via(1, Priority::High, LineRegister::Y).unwrap();
        m.release(0).unwrap();
        let trace = m.trace_jsonl();
        let events: Vec<LogEvent> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(events, m.log());
        assert!(trace.contains("\"via\":\"y\""));
    }

    /// Flat-table replay of the same policy, for comparison.
    struct Naive {
        slots: Vec<Option<(VarId, Priority, u64)>>,
        free: Vec<usize>,
        clock: u64,
    }

    impl Naive {
        fn new(n: usize) -> Self {
            Self { slots: vec![None; n], free: (0..n).rev().collect(), clock: 0 }
        }

        fn tick(&mut self) -> u64 {
            self.clock += 1;
            self.clock
        }

        fn request(&mut self, var: VarId, pr: Priority, register: bool) -> (Space, usize) {
            if register {
                return (Space::Register, 7);
            }
            if let Some(s) = self.slots.iter().position(|x| matches!(x, Some((v, _, _)) if *v == var)) {
                let (_, cur, _) = self.slots[s].unwrap();
                if pr > cur {
                    let t = self.tick();
                    self.slots[s] = Some((var, pr, t));
                }
                return (Space::Shared, s);
            }
            if self.free.is_empty() {
                let victim = self
                    .slots
                    .iter()
                    .enumerate()
                    .filter_map(|(s, x)| x.map(|(_, p, t)| (p, std::cmp::Reverse(t), s)))
                    .filter(|(p, _, _)| *p < pr)
                    .min();
                match victim {
                    None => return (Space::Global, var),
                    Some((_, _, s)) => {
                        self.slots[s] = None;
                        self.free.push(s);
                    }
                }
            }
            let s = self.free.pop().unwrap();
            let t = self.tick();
            self.slots[s] = Some((var, pr, t));
            (Space::Shared, s)
        }

        fn set(&mut self, var: VarId, pr: Priority) {
            if let Some(s) = self.slots.iter().position(|x| matches!(x, Some((v, _, _)) if *v == var)) {
                let (_, cur, _) = self.slots[s].unwrap();
                if cur != pr {
                    let t = self.tick();
                    self.slots[s] = Some((var, pr, t));
                }
            }
        }

        fn release(&mut self, var: VarId) {
            if let Some(s) = self.slots.iter().position(|x| matches!(x, Some((v, _, _)) if *v == var)) {
                self.slots[s] = None;
                self.free.push(s);
            }
        }
    }

    #[derive(Debug, Clone)]
    enum Op {
        Request(VarId, Priority),
        Set(VarId, Priority),
        Release(VarId),
    }

    fn priority() -> impl Strategy<Value = Priority> {
        prop_oneof![Just(Priority::Low), Just(Priority::Medium), Just(Priority::High)]
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            6 => (0usize..12, priority()).prop_map(|(v, p)| Op::Request(v, p)),
            2 => (0usize..12, priority()).prop_map(|(v, p)| Op::Set(v, p)),
            1 => (0usize..12).prop_map(Op::Release),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn agrees_with_naive_replay(slots in 1usize..6, ops in proptest::collection::vec(op(), 1..80)) {
            let mut m = ManagerState::new(slots * 8 * 4, 8, 4);
            for v in 0..11 {
                m.declare_global(v);
            }
            m.declare_register(11, 7);
            let mut naive = Naive::new(slots);
            for op in ops {
                match op {
                    Op::Request(v, p) => {
                        let got = m.request(v, p).unwrap();
                        let want = naive.request(v, p, v == 11);
                        prop_assert_eq!((got.space, got.slot), want);
                    }
                    Op::Set(v, p) => {
                        let res = match m.priority_of(v) {
                            Some(cur) if p >= cur => m.escalate(v, p),
                            Some(_) => m.deescalate(v, p),
                            None => Err(ManagerError::NotShared(v)),
                        };
                        if res.is_ok() {
                            naive.set(v, p);
                        }
                    }
                    Op::Release(v) => {
                        let _ = m.release(v);
                        naive.release(v);
                    }
                }
                let parts = m.partitions();
                prop_assert!(parts.used() * parts.slot_bytes <= parts.capacity_bytes);
                prop_assert_eq!(parts.used() + parts.free.len(), parts.slots());
                let mut vars: Vec<VarId> = parts.stacks.iter().flatten().map(|r| r.var).collect();
                vars.sort_unstable();
                let n = vars.len();
                vars.dedup();
                prop_assert_eq!(vars.len(), n);
            }
        }

        #[test]
        fn eviction_never_hits_equal_or_higher(ops in proptest::collection::vec((0usize..12, priority()), 1..60)) {
            let mut m = ManagerState::new(3 * 4 * 4, 4, 4);
            for v in 0..12 {
                m.declare_global(v);
            }
            for (v, p) in ops {
                let before = m.log().len();
                m.request(v, p).unwrap();
                for ev in &m.log()[before..] {
                    if let LogEvent::Evict { priority, .. } = ev {
                        prop_assert!(*priority < p);
                    }
                }
            }
        }
    }
}

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// One shared-memory access in an execution trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedAccess {
    pub word: usize,
    pub thread: u32,
    /// Barriers the block has passed before the access.
    pub epoch: u32,
    pub instr: u32,
    pub write: bool,
}

/// Two unsynchronised accesses to one shared word, at least one a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceFlag {
    pub first_instr: u32,
    pub second_instr: u32,
    pub word: usize,
    pub epoch: u32,
    pub block: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Tag {
    epoch: u32,
    thread: u32,
    instr: u32,
}

/// Online detector: a word written in an epoch and touched by another
/// thread in the same epoch is a race.
#[derive(Debug, Clone, Default)]
pub struct RaceDetector {
    writes: Vec<Option<Tag>>,
    /// Up to two readers of the current epoch with distinct threads.
    reads: Vec<[Option<Tag>; 2]>,
    flags: Vec<RaceFlag>,
    seen: HashSet<(u32, u32)>,
    total: usize,
    block: usize,
}

/// Distinct instruction pairs kept in full; later ones are only counted.
const MAX_FLAGS: usize = 64;

impl RaceDetector {
    pub fn new(words: usize) -> Self {
        Self { writes: vec![None; words], reads: vec![[None; 2]; words], ..Default::default() }
    }

    /// Forgets every access, for the next block.
    pub fn reset(&mut self, block: usize) {
        self.writes.iter_mut().for_each(|w| *w = None);
        self.reads.iter_mut().for_each(|r| *r = [None; 2]);
        self.block = block;
    }

    fn flag(&mut self, first: u32, second: u32, word: usize, epoch: u32) {
        self.total += 1;
        if self.seen.insert((first, second)) && self.flags.len() < MAX_FLAGS {
            self.flags.push(RaceFlag { first_instr: first, second_instr: second, word, epoch, block: self.block });
        }
    }

    pub fn access(&mut self, a: SharedAccess) {
        if a.word >= self.writes.len() {
            self.writes.resize(a.word + 1, None);
            self.reads.resize(a.word + 1, [None; 2]);
        }
        let tag = Tag { epoch: a.epoch, thread: a.thread, instr: a.instr };
        if let Some(w) = self.writes[a.word] {
            if w.epoch == a.epoch && w.thread != a.thread {
                self.flag(w.instr, a.instr, a.word, a.epoch);
            }
        }
        let readers = self.reads[a.word];
        if a.write {
            for r in readers.into_iter().flatten() {
                if r.epoch == a.epoch && r.thread != a.thread {
                    self.flag(r.instr, a.instr, a.word, a.epoch);
                }
            }
            self.writes[a.word] = Some(tag);
        } else {
            let slot = &mut self.reads[a.word];
            match slot[0] {
                Some(r0) if r0.epoch == a.epoch => {
                    if r0.thread != a.thread && slot[1].is_none_or(|r1| r1.epoch != a.epoch) {
                        slot[1] = Some(tag);
                    }
                }
                _ => *slot = [Some(tag), None],
            }
        }
    }

    pub fn flags(&self) -> &[RaceFlag] {
        &self.flags
    }

    /// Racing access pairs seen, including those not kept.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn into_flags(self) -> Vec<RaceFlag> {
        self.flags
    }
}

/// Races in a recorded trace of one block.
pub fn detect_races(trace: &[SharedAccess]) -> Vec<RaceFlag> {
    let mut d = RaceDetector::new(trace.iter().map(|a| a.word + 1).max().unwrap_or(0));
    for &a in trace {
        d.access(a);
    }
    d.into_flags()
}

//! Exact stack distances in O(M log M).
//!
//! Every datum keeps a mark at the timestamp of its most recent access in a
//! Fenwick tree; the distance of a reuse is the number of marks at or after
//! the previous timestamp. Timestamps are renumbered to `0..live` whenever
//! the tree fills up, so its size stays within twice the footprint.

use std::collections::HashMap;

use super::ReuseDistribution;
use crate::kernels::{DatumId, KernelConfig, KernelError, MemoryTrace, TraceSink};

const NONE: u32 = u32::MAX;
const MIN_CAPACITY: usize = 1 << 16;
const SMALL_DISTANCES: usize = 1 << 16;

struct Fenwick {
    tree: Vec<u32>,
    ops: u64,
}

impl Fenwick {
    fn with_ones(ones: usize, cap: usize) -> Self {
        let mut tree = vec![0u32; cap + 1];
        for slot in tree.iter_mut().skip(1).take(ones) {
            *slot = 1;
        }
        for i in 1..=cap {
            let j = i + (i & i.wrapping_neg());
            if j <= cap {
                tree[j] += tree[i];
            }
        }
        Fenwick { tree, ops: 0 }
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    /// Marks in `[0, pos)`.
    fn prefix(&mut self, pos: usize) -> u32 {
        let mut i = pos;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
            self.ops += 1;
        }
        s
    }

    fn add(&mut self, pos: usize, delta: i32) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
            self.ops += 1;
        }
    }
}

/// Streaming reuse-distance analyzer.
///
/// Usable directly as a [`TraceSink`] so kernels can be analyzed without
/// materializing their trace. Allocation events are ignored: a managed
/// kernel that hands a freed id to a new temporary reuses that address.
pub struct StackAnalyzer {
    /// Last timestamp per region, indexed densely by datum index.
    last: [Vec<u32>; 4],
    /// Ids too sparse for the dense tables.
    far: HashMap<DatumId, u32>,
    tree: Fenwick,
    marked: Vec<bool>,
    clock: usize,
    live: usize,
    small: Vec<u64>,
    large: HashMap<u64, u64>,
    cold: u64,
    total: u64,
    compactions: u64,
}

impl Default for StackAnalyzer {
    fn default() -> Self {
        Self::new()
    }
}

impl StackAnalyzer {
    pub fn new() -> Self {
        StackAnalyzer {
            last: Default::default(),
            far: HashMap::new(),
            tree: Fenwick::with_ones(0, MIN_CAPACITY),
            marked: vec![false; MIN_CAPACITY],
            clock: 0,
            live: 0,
            small: vec![0; SMALL_DISTANCES],
            large: HashMap::new(),
            cold: 0,
            total: 0,
            compactions: 0,
        }
    }

    fn slot(&mut self, id: DatumId) -> &mut u32 {
        if self.far.contains_key(&id) {
            return self.far.get_mut(&id).expect("present");
        }
        let table = &mut self.last[id.region().code() as usize];
        let idx = id.index() as usize;
        if idx >= table.len() {
            // grow densely only while the table stays proportional to the footprint
            let bound = 4 * (self.live + 1) + MIN_CAPACITY;
            if idx >= bound.max(2 * table.len()) {
                return self.far.entry(id).or_insert(NONE);
            }
            table.resize((idx + 1).max(2 * table.len()), NONE);
        }
        &mut table[idx]
    }

    /// Processes one access and returns its reuse distance (`None` if cold).
    pub fn step(&mut self, id: DatumId) -> Option<u64> {
        if self.clock == self.tree.capacity() {
            self.compact();
        }
        let now = self.clock as u32;
        let prev = std::mem::replace(self.slot(id), now);
        self.total += 1;
        let distance = if prev == NONE {
            self.live += 1;
            self.cold += 1;
            None
        } else {
            let p = prev as usize;
            let d = self.live as u64 - self.tree.prefix(p) as u64;
            self.tree.add(p, -1);
            self.marked[p] = false;
            Some(d)
        };
        self.tree.add(self.clock, 1);
        self.marked[self.clock] = true;
        self.clock += 1;
        distance
    }

    fn record(&mut self, d: u64) {
        match self.small.get_mut(d as usize) {
            Some(c) => *c += 1,
            None => *self.large.entry(d).or_insert(0) += 1,
        }
    }

    fn compact(&mut self) {
        self.compactions += 1;
        let mut rank = vec![0u32; self.clock];
        let mut r = 0u32;
        for (p, slot) in rank.iter_mut().enumerate() {
            *slot = r;
            r += self.marked[p] as u32;
        }
        debug_assert_eq!(r as usize, self.live);
        let remap = |t: &mut u32| {
            if *t != NONE {
                *t = rank[*t as usize];
            }
        };
        self.last.iter_mut().flat_map(|t| t.iter_mut()).for_each(remap);
        self.far.values_mut().for_each(remap);
        let cap = (2 * self.live + 2).max(MIN_CAPACITY);
        self.tree = Fenwick { ops: self.tree.ops, ..Fenwick::with_ones(self.live, cap) };
        self.marked.clear();
        self.marked.resize(cap, false);
        self.marked[..self.live].fill(true);
        self.clock = self.live;
    }

    /// Fenwick-tree node visits so far.
    pub fn tree_ops(&self) -> u64 {
        self.tree.ops
    }

    pub fn compactions(&self) -> u64 {
        self.compactions
    }

    /// Distinct data seen so far.
    pub fn footprint(&self) -> u64 {
        self.live as u64
    }

    pub fn distribution(&self) -> ReuseDistribution {
        let mut d = ReuseDistribution::new();
        for (dist, &c) in self.small.iter().enumerate() {
            d.add(dist as u64, c);
        }
        for (&dist, &c) in &self.large {
            d.add(dist, c);
        }
        d.add_cold(self.cold);
        debug_assert_eq!(d.total, self.total);
        d
    }
}

impl TraceSink for StackAnalyzer {
    #[inline]
    fn access(&mut self, id: DatumId) {
        if let Some(d) = self.step(id) {
            self.record(d);
        }
    }
}

pub fn reuse_histogram(trace: &MemoryTrace) -> ReuseDistribution {
    let mut a = StackAnalyzer::new();
    trace.replay(&mut a);
    a.distribution()
}

/// Per-event reuse distances, `None` for cold accesses.
pub fn reuse_sequence(trace: &MemoryTrace) -> Vec<Option<u64>> {
    let mut a = StackAnalyzer::new();
    trace.events.iter().map(|&e| a.step(e)).collect()
}

/// Streams a kernel straight into an analyzer.
pub fn analyze_kernel(cfg: &KernelConfig) -> Result<StackAnalyzer, KernelError> {
    let mut a = StackAnalyzer::new();
    cfg.emit(&mut a)?;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{rmm_trace, TraceSemantics};

    fn ids(s: &str) -> MemoryTrace {
        MemoryTrace::from_events(s.bytes().map(|b| DatumId::a((b - b'a') as u64)).collect())
    }

    #[test]
    fn worked_examples() {
        assert_eq!(reuse_histogram(&ids("abbca")), ReuseDistribution::from_pairs([(1, 1), (3, 1)], 3));
        assert_eq!(reuse_histogram(&ids("aaa")), ReuseDistribution::from_pairs([(1, 2)], 1));
        assert_eq!(reuse_histogram(&ids("abcabcabc")), ReuseDistribution::from_pairs([(3, 6)], 3));
        assert_eq!(reuse_histogram(&MemoryTrace::from_events(vec![])), ReuseDistribution::new());
    }

    #[test]
    fn sequence_matches_histogram() {
        let seq = reuse_sequence(&ids("abbca"));
        assert_eq!(seq, vec![None, None, Some(1), None, Some(3)]);
    }

    #[test]
    fn compaction_preserves_distances() {
        // a long cyclic trace over a small alphabet forces many compactions
        let events: Vec<DatumId> = (0..300_000u64).map(|t| DatumId::b(t % 7)).collect();
        let mut a = StackAnalyzer::new();
        for &e in &events {
            a.access(e);
        }
        assert!(a.compactions() >= 4);
        assert_eq!(a.distribution(), ReuseDistribution::from_pairs([(7, 300_000 - 7)], 7));
    }

    #[test]
    fn sparse_ids_use_the_overflow_map() {
        let events = vec![DatumId::a(0), DatumId::a(1 << 40), DatumId::temp(3), DatumId::a(1 << 40), DatumId::a(0)];
        let d = reuse_histogram(&MemoryTrace::from_events(events));
        assert_eq!(d, ReuseDistribution::from_pairs([(2, 1), (3, 1)], 3));
    }

    #[test]
    fn streaming_equals_materialized() {
        let cfg = KernelConfig::new(crate::kernels::KernelKind::Rmm, 8);
        let streamed = analyze_kernel(&cfg).unwrap().distribution();
        assert_eq!(streamed, reuse_histogram(&rmm_trace(8, TraceSemantics::default()).unwrap()));
    }
}

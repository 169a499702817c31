//! Independent fully associative LRU cache simulator.

use std::collections::{BTreeMap, HashMap};

use crate::kernels::{DatumId, MemoryTrace};

pub struct LruCache {
    capacity: usize,
    by_time: BTreeMap<u64, DatumId>,
    stamp: HashMap<DatumId, u64>,
    clock: u64,
    pub misses: u64,
    pub accesses: u64,
}

impl LruCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "cache capacity must be at least 1");
        LruCache { capacity, by_time: BTreeMap::new(), stamp: HashMap::new(), clock: 0, misses: 0, accesses: 0 }
    }

    /// Returns true on a hit.
    pub fn access(&mut self, id: DatumId) -> bool {
        self.accesses += 1;
        self.clock += 1;
        let hit = match self.stamp.insert(id, self.clock) {
            Some(old) => {
                self.by_time.remove(&old);
                true
            }
            None => {
                self.misses += 1;
                if self.stamp.len() > self.capacity {
                    let (_, victim) = self.by_time.pop_first().expect("cache is non-empty");
                    self.stamp.remove(&victim);
                }
                false
            }
        };
        self.by_time.insert(self.clock, id);
        hit
    }
}

/// Miss count of `trace` under LRU with room for `c` data.
pub fn lru_simulate(trace: &MemoryTrace, c: usize) -> u64 {
    let mut cache = LruCache::new(c);
    for &e in &trace.events {
        cache.access(e);
    }
    cache.misses
}

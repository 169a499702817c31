//! LRU reuse distances.
//!
//! The reuse distance of an access is the number of distinct data touched in
//! the closed window from the previous access to the same datum up to and
//! including this one, so `a b b c a` has distances `{1: 1, 3: 1}` and three
//! cold (first) accesses. Cold accesses are kept out of the histogram.

mod analyzer;
mod lru;
mod mrc;
mod oracle;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analyzer::{analyze_kernel, reuse_histogram, reuse_sequence, StackAnalyzer};
pub use lru::{lru_simulate, LruCache};
pub use mrc::{miss_ratio_curve, ColdMisses, MissRatioCurve};
pub use oracle::{reuse_histogram_naive, reuse_sequence_naive};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistributionError {
    #[error("histogram mass {reuses} + cold {cold} does not equal total {total}")]
    Mass { reuses: u64, cold: u64, total: u64 },
    #[error("reuse distance 0 is not possible")]
    ZeroDistance,
    #[error("reuse distance {distance} exceeds footprint {footprint}")]
    ExceedsFootprint { distance: u64, footprint: u64 },
    #[error("malformed distribution: {0}")]
    Parse(String),
}

/// Multiset of reuse distances plus cold-access count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseDistribution {
    pub counts: BTreeMap<u64, u64>,
    pub cold: u64,
    pub total: u64,
}

impl ReuseDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a distribution from `(distance, count)` pairs; `total` is
    /// derived from the pairs and `cold`.
    pub fn from_pairs<I: IntoIterator<Item = (u64, u64)>>(pairs: I, cold: u64) -> Self {
        let mut d = ReuseDistribution { cold, total: cold, ..Self::default() };
        for (dist, count) in pairs {
            d.add(dist, count);
        }
        d
    }

    /// Adds `count` reuses at `distance` (and to the total).
    pub fn add(&mut self, distance: u64, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(distance).or_insert(0) += count;
        self.total += count;
    }

    pub fn add_cold(&mut self, count: u64) {
        self.cold += count;
        self.total += count;
    }

    /// Number of non-cold accesses.
    pub fn reuses(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn max_distance(&self) -> Option<u64> {
        self.counts.keys().next_back().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Multiplicity at one distance.
    pub fn count(&self, distance: u64) -> u64 {
        self.counts.get(&distance).copied().unwrap_or(0)
    }

    /// Disjoint union.
    pub fn merge(&mut self, other: &ReuseDistribution) {
        for (&d, &c) in &other.counts {
            self.add(d, c);
        }
        self.add_cold(other.cold);
    }

    pub fn check(&self) -> Result<(), DistributionError> {
        let reuses = self.reuses();
        if reuses + self.cold != self.total {
            return Err(DistributionError::Mass { reuses, cold: self.cold, total: self.total });
        }
        if self.counts.range(..1).any(|(_, &c)| c > 0) {
            return Err(DistributionError::ZeroDistance);
        }
        Ok(())
    }

    /// [`check`](Self::check) plus: no distance may exceed `footprint`.
    pub fn check_footprint(&self, footprint: u64) -> Result<(), DistributionError> {
        self.check()?;
        match self.max_distance() {
            Some(d) if d > footprint => Err(DistributionError::ExceedsFootprint { distance: d, footprint }),
            _ => Ok(()),
        }
    }

    /// The first distance at which two distributions disagree, with both
    /// multiplicities.
    pub fn first_difference(&self, other: &ReuseDistribution) -> Option<(u64, u64, u64)> {
        let mut keys: Vec<u64> = self.counts.keys().chain(other.counts.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter().map(|d| (d, self.count(d), other.count(d))).find(|(_, a, b)| a != b)
    }

    /// `distance,count` rows followed by `cold,<k>` and `total,<M>`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("distance,count\n");
        for (d, c) in &self.counts {
            let _ = writeln!(s, "{d},{c}");
        }
        let _ = writeln!(s, "cold,{}", self.cold);
        let _ = writeln!(s, "total,{}", self.total);
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, DistributionError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("distance,count") {
            return Err(DistributionError::Parse("missing header".into()));
        }
        let mut d = ReuseDistribution::new();
        let mut total = None;
        for line in lines {
            let (k, v) =
                line.trim().split_once(',').ok_or_else(|| DistributionError::Parse(format!("bad row '{line}'")))?;
            let v: u64 = v.parse().map_err(|_| DistributionError::Parse(format!("bad count '{v}'")))?;
            match k {
                "cold" => d.add_cold(v),
                "total" => total = Some(v),
                _ => d.add(k.parse().map_err(|_| DistributionError::Parse(format!("bad distance '{k}'")))?, v),
            }
        }
        if let Some(t) = total {
            if t != d.total {
                return Err(DistributionError::Mass { reuses: d.reuses(), cold: d.cold, total: t });
            }
        }
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DistributionError> {
        serde_json::from_str(text).map_err(|e| DistributionError::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_round_trip() {
        let d = ReuseDistribution::from_pairs([(1, 1), (3, 1)], 3);
        assert_eq!(d.total, 5);
        let csv = d.to_csv();
        assert_eq!(csv, "distance,count\n1,1\n3,1\ncold,3\ntotal,5\n");
        assert_eq!(ReuseDistribution::from_csv(&csv).unwrap(), d);
        assert_eq!(ReuseDistribution::from_json(&d.to_json()).unwrap(), d);
        assert!(ReuseDistribution::from_csv("distance,count\n1,1\ntotal,7\n").is_err());
    }

    #[test]
    fn invariants() {
        let mut d = ReuseDistribution::from_pairs([(2, 4)], 1);
        d.check().unwrap();
        assert_eq!(d.check_footprint(1), Err(DistributionError::ExceedsFootprint { distance: 2, footprint: 1 }));
        d.total += 1;
        assert!(matches!(d.check(), Err(DistributionError::Mass { .. })));
        let z = ReuseDistribution::from_pairs([(0, 1)], 0);
        assert_eq!(z.check(), Err(DistributionError::ZeroDistance));
    }

    #[test]
    fn merge_and_diff() {
        let mut a = ReuseDistribution::from_pairs([(1, 2)], 1);
        let b = ReuseDistribution::from_pairs([(1, 1), (5, 1)], 2);
        assert_eq!(a.first_difference(&b), Some((1, 2, 1)));
        a.merge(&b);
        assert_eq!(a, ReuseDistribution::from_pairs([(1, 3), (5, 1)], 3));
        assert_eq!(a.first_difference(&a.clone()), None);
    }
}

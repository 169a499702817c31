use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ReuseDistribution;
use crate::numfmt::sig6;

/// How first accesses are treated by a miss-ratio curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ColdMisses {
    /// Compulsory misses at every cache size.
    #[default]
    AlwaysMiss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissRatioCurve {
    /// `(cache size, miss ratio)` in increasing size order.
    pub points: Vec<(u64, f64)>,
    /// Exact miss counts behind each ratio.
    pub misses: Vec<u64>,
    pub total: u64,
    pub policy_for_cold: ColdMisses,
}

impl MissRatioCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cache_size,miss_ratio\n");
        for &(c, r) in &self.points {
            let _ = writeln!(s, "{c},{}", sig6(r));
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl ReuseDistribution {
    /// Misses of a fully associative LRU cache holding `c` data:
    /// reuses farther than `c` plus every cold access.
    pub fn misses_at(&self, c: u64) -> u64 {
        self.counts.range(c + 1..).map(|(_, &n)| n).sum::<u64>() + self.cold
    }

    pub fn miss_ratio(&self, c: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.misses_at(c) as f64 / self.total as f64
    }
}

/// Miss ratios at the given sizes, sorted and deduplicated. An empty
/// distribution gives an empty curve.
pub fn miss_ratio_curve(dist: &ReuseDistribution, sizes: &[u64]) -> MissRatioCurve {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if dist.is_empty() {
        sizes.clear();
    }
    let misses: Vec<u64> = sizes.iter().map(|&c| dist.misses_at(c)).collect();
    let points = sizes.iter().zip(&misses).map(|(&c, &m)| (c, m as f64 / dist.total as f64)).collect();
    MissRatioCurve { points, misses, total: dist.total, policy_for_cold: ColdMisses::AlwaysMiss }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let d = ReuseDistribution::from_pairs([(1, 1), (3, 1)], 3);
        let m = miss_ratio_curve(&d, &[3, 1]);
        assert_eq!(m.points, vec![(1, 0.8), (3, 0.6)]);
        assert_eq!(m.misses, vec![4, 3]);
        assert_eq!(m.to_csv(), "cache_size,miss_ratio\n1,0.8\n3,0.6\n");
        assert_eq!(d.misses_at(1000), d.cold);
    }

    #[test]
    fn immediate_reuse() {
        let k = 9;
        let d = ReuseDistribution::from_pairs([(1, k)], 1);
        assert_eq!(d.miss_ratio(1), 1.0 / (k + 1) as f64);
    }

    #[test]
    fn empty() {
        assert!(miss_ratio_curve(&ReuseDistribution::new(), &[1, 2]).is_empty());
    }
}

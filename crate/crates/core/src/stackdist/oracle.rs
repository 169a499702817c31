//! Brute-force reference: rescans the reuse window of every access.

use std::collections::HashMap;

use super::ReuseDistribution;
use crate::kernels::MemoryTrace;

/// Per-event distances computed by window rescans, O(M * footprint).
pub fn reuse_sequence_naive(trace: &MemoryTrace) -> Vec<Option<u64>> {
    let mut dense = HashMap::new();
    let keys: Vec<usize> = trace
        .events
        .iter()
        .map(|&e| {
            let next = dense.len();
            *dense.entry(e).or_insert(next)
        })
        .collect();
    let mut last = vec![usize::MAX; dense.len()];
    let mut stamp = vec![0usize; dense.len()];
    let mut out = Vec::with_capacity(keys.len());
    for (t, &k) in keys.iter().enumerate() {
        let prev = std::mem::replace(&mut last[k], t);
        if prev == usize::MAX {
            out.push(None);
            continue;
        }
        let generation = t + 1;
        let mut distinct = 0u64;
        for &w in &keys[prev..=t] {
            if stamp[w] != generation {
                stamp[w] = generation;
                distinct += 1;
            }
        }
        out.push(Some(distinct));
    }
    out
}

pub fn reuse_histogram_naive(trace: &MemoryTrace) -> ReuseDistribution {
    let mut d = ReuseDistribution::new();
    for r in reuse_sequence_naive(trace) {
        match r {
            Some(x) => d.add(x, 1),
            None => d.add_cold(1),
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DatumId;

    #[test]
    fn worked_examples() {
        let t = |s: &str| MemoryTrace::from_events(s.bytes().map(|b| DatumId::b(b as u64)).collect());
        assert_eq!(reuse_histogram_naive(&t("abbca")), ReuseDistribution::from_pairs([(1, 1), (3, 1)], 3));
        assert_eq!(reuse_histogram_naive(&t("aaa")), ReuseDistribution::from_pairs([(1, 2)], 1));
        assert_eq!(reuse_histogram_naive(&t("abcabcabc")), ReuseDistribution::from_pairs([(3, 6)], 3));
    }
}

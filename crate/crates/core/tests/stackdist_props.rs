use dmd_core::kernels::{random_trace, DatumId, KernelConfig, KernelKind, MemoryTrace};
use dmd_core::stackdist::{
    lru_simulate, miss_ratio_curve, reuse_histogram, reuse_histogram_naive, reuse_sequence, reuse_sequence_naive,
    StackAnalyzer,
};
use proptest::prelude::*;

fn trace_strategy() -> impl Strategy<Value = MemoryTrace> {
    (1u64..64, 0usize..600).prop_flat_map(|(alphabet, len)| {
        prop::collection::vec(0..alphabet, len)
            .prop_map(|ids| MemoryTrace::from_events(ids.into_iter().map(DatumId::a).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fast_path_matches_oracle(t in trace_strategy()) {
        prop_assert_eq!(reuse_sequence(&t), reuse_sequence_naive(&t));
    }

    #[test]
    fn mrc_matches_lru(t in trace_strategy(), c in 1usize..40) {
        let mrc = miss_ratio_curve(&reuse_histogram(&t), &[c as u64]);
        prop_assert_eq!(mrc.misses[0], lru_simulate(&t, c));
    }

    #[test]
    fn distribution_invariants(t in trace_strategy()) {
        let d = reuse_histogram(&t);
        prop_assert!(d.check().is_ok());
        prop_assert_eq!(d.total, t.len() as u64);
        let distinct = t.events.iter().collect::<std::collections::HashSet<_>>().len() as u64;
        prop_assert_eq!(d.cold, distinct);
        prop_assert!(d.max_distance().unwrap_or(0) <= distinct);
    }

    #[test]
    fn miss_ratio_is_nonincreasing(t in trace_strategy()) {
        let sizes: Vec<u64> = (1..=70).collect();
        let mrc = miss_ratio_curve(&reuse_histogram(&t), &sizes);
        prop_assert!(mrc.misses.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn worked_example() {
    let t = MemoryTrace::from_events([0, 1, 1, 2, 0].into_iter().map(DatumId::a).collect());
    let d = reuse_histogram(&t);
    assert_eq!(d.counts.iter().map(|(&k, &v)| (k, v)).collect::<Vec<_>>(), vec![(1, 1), (3, 1)]);
    assert_eq!(d.cold, 3);
}

#[test]
fn seeded_corpus_and_rmm8() {
    for seed in 0..20 {
        let t = random_trace(2000, 1 + seed % 64, seed);
        assert_eq!(reuse_histogram(&t), reuse_histogram_naive(&t), "seed {seed}");
    }
    let t = KernelConfig::new(KernelKind::Rmm, 8).trace().unwrap();
    assert_eq!(reuse_sequence(&t), reuse_sequence_naive(&t));
}

#[test]
fn operation_count_is_n_log_n() {
    // tree operations per access grow like log M
    let mut per_access = Vec::new();
    for len in [1usize << 12, 1 << 16] {
        let t = random_trace(len, (len / 4) as u64, 3);
        let mut a = StackAnalyzer::new();
        for &e in &t.events {
            a.step(e);
        }
        let ops = a.tree_ops() as f64;
        let bound = len as f64 * (len as f64).log2();
        assert!(ops <= 4.0 * bound, "{ops} > 4 M log M");
        per_access.push(ops / len as f64);
    }
    // 16x the length: log factor grows by 16/12, allow slack but no linear blowup
    assert!(per_access[1] / per_access[0] < 2.0, "{per_access:?}");
}

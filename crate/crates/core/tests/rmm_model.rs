use dmd_core::kernels::{footprint, rmm_trace, TraceSemantics};
use dmd_core::rmm_model::{
    calibrate_on, compute_rmm_rdd, node_count, observe, rc, temp_count, temp_count_by_levels, verify_model, RmmModel,
    CALIBRATION_SIZES,
};
use dmd_core::stackdist::reuse_histogram;

#[test]
fn grids_repeat_with_group_parity() {
    for n in [8usize, 16] {
        let o = observe(n, false).unwrap();
        assert!(o.is_consistent());
        for (l, grids) in &o.blocks {
            assert!(grids.len() >= 2, "level {l}");
            for (a, g) in grids.iter().enumerate() {
                assert_eq!(g, &grids[a % 2], "n={n} level {l} block {a}");
            }
        }
    }
}

#[test]
fn temporary_counts() {
    for n in [1usize, 2, 4, 8, 16, 32, 64] {
        assert_eq!(temp_count(n), temp_count_by_levels(n));
        let t = rmm_trace(n, TraceSemantics::default()).unwrap();
        assert_eq!(footprint(&t).temp_ids, temp_count(n), "n={n}");
    }
    assert_eq!(node_count(8, 2).unwrap(), 64);
    assert_eq!([rc(8, 1).unwrap(), rc(8, 2).unwrap(), rc(8, 4).unwrap()], [4, 2, 1]);
    assert!(rc(8, 8).is_err());
}

#[test]
fn multiplicities_reproduce_the_trace() {
    for n in [2usize, 4, 8, 16, 32] {
        let model = compute_rmm_rdd(n).unwrap();
        let t = rmm_trace(n, TraceSemantics::default()).unwrap();
        let oracle = reuse_histogram(&t);
        assert_eq!(model.total, t.len() as u64);
        assert_eq!(model.cold, oracle.cold);
        assert_eq!(model.reuses(), oracle.reuses());
    }
}

#[test]
fn calibration_ignores_held_out_sizes() {
    assert!(CALIBRATION_SIZES.iter().all(|&n| n <= 8));
    let report = calibrate_on(&CALIBRATION_SIZES).unwrap();
    for n in [16usize, 32, 64] {
        let r = dmd_core::rmm_model::verify_with(&RmmModel::new(report.table, n), n).unwrap();
        assert!(r.equal, "{r}");
    }
}

#[test]
fn held_out_verification() {
    for n in [16usize, 32, 64] {
        let r = verify_model(n).unwrap();
        assert!(r.equal, "{r}");
        assert_eq!(r.dmd_relative_error(), 0.0);
    }
}

#[test]
fn evaluation_count_grows_like_n2_log_n() {
    let evals: Vec<f64> = [16usize, 32, 64, 128]
        .iter()
        .map(|&n| RmmModel::resolved(n).run(n).unwrap().evaluations as f64 / ((n * n) as f64 * (n as f64).log2()))
        .collect();
    assert!(evals.iter().all(|&e| e <= 3.0), "{evals:?}");
}

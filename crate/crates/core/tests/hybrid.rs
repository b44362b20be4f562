mod common;

use hybreg::clustering::ClusterKind;
use hybreg::dataset::{split, synthesize};
use hybreg::hybrid::{compare_methods, regression_metrics, weighted_average, Group};
use hybreg::mlp::{Activation, Solver, TrainLimits};
use hybreg::quality::adjusted_rand_index;
use hybreg::{error_report, train_hybrid, Dataset, ErrorReport, GridSpec, HybridConfig, SplitSpec};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

use common::{config, uniform};

fn quick_grid(seed: u64) -> GridSpec {
    GridSpec {
        neurons: 6..=6,
        activations: vec![Activation::Tanh],
        solvers: vec![Solver::Lbfgs],
        folds: 3,
        seed,
        limits: TrainLimits {
            max_iter: 150,
            ..Default::default()
        },
    }
}

fn groups() -> impl Strategy<Value = Vec<Group>> {
    prop::collection::vec(
        (1usize..12).prop_flat_map(|m| {
            (
                prop::collection::vec(0.5f64..50.0, m),
                prop::collection::vec(0.5f64..50.0, m),
                0.1f64..5.0,
            )
                .prop_map(|(observed, predicted, s)| Group {
                    observed,
                    predicted,
                    mase_scale: Some(s),
                })
        }),
        1..5,
    )
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn weighted_average_is_size_weighted(gs in groups()) {
        let report = ErrorReport::from_groups(&gs).unwrap();
        let n: usize = report.cluster_sizes.iter().sum();
        let rows: Vec<_> = report.per_cluster.iter().map(|r| r.unwrap()).collect();
        for m in 0..7 {
            let want = rows
                .iter()
                .zip(&report.cluster_sizes)
                .map(|(r, &s)| r.values()[m].unwrap() * s as f64)
                .sum::<f64>()
                / n as f64;
            let got = report.weighted_average.values()[m].unwrap();
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{m}: {got} vs {want}");
        }
        let again = weighted_average(&report.per_cluster, &report.cluster_sizes).unwrap();
        prop_assert_eq!(again, report.weighted_average);
    }

    #[test]
    fn metrics_are_consistent(
        pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40),
        scale in 0.1f64..5.0,
    ) {
        let (y, yhat): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (row, _) = regression_metrics(&y, &yhat, Some(scale));
        prop_assert!(row.mse >= 0.0 && row.mae >= 0.0 && row.lmls >= 0.0);
        prop_assert!(row.mape >= 0.0 && row.smape >= 0.0);
        prop_assert!(row.mase.unwrap() >= 0.0);
        prop_assert!(row.mae * row.mae <= row.mse * (1.0 + 1e-12));
        prop_assert!((row.mase.unwrap() - row.mae / scale).abs() < 1e-12 * row.mae.max(1.0));
    }
}

fn synthetic_split(n: usize, seed: u64) -> (Dataset, Dataset, Vec<usize>) {
    let s = synthesize(n, seed).unwrap();
    let spec = SplitSpec {
        validation_fraction: 0.2,
        seed,
    };
    let (train_idx, val_idx) = hybreg::dataset::split_indices(n, &spec).unwrap();
    let val_regimes = val_idx.iter().map(|&i| s.regimes[i]).collect();
    let (train, val) = split(&s.dataset, &spec).unwrap();
    assert_eq!(train.n_samples(), train_idx.len());
    (train, val, val_regimes)
}

#[test]
fn validation_rows_partition_over_clusters() {
    let (train, val, regimes) = synthetic_split(600, 3);
    let model = train_hybrid(
        &train,
        &HybridConfig::new(ClusterKind::KMeans, 4, quick_grid(1), 3),
    )
    .unwrap();
    let predictions = model.predict_batch(val.features()).unwrap();
    let groups = model.groups(&val).unwrap();
    assert_eq!(groups.len(), 4);
    assert_eq!(
        groups.iter().map(|g| g.observed.len()).sum::<usize>(),
        val.n_samples()
    );
    for (j, g) in groups.iter().enumerate() {
        let count = predictions.iter().filter(|p| p.cluster == j).count();
        assert_eq!(g.observed.len(), count);
    }
    let routed: Vec<usize> = predictions.iter().map(|p| p.cluster).collect();
    let ari = adjusted_rand_index(&routed, &regimes);
    assert!(ari >= 0.95, "{ari}");

    let report = error_report(&model, &val).unwrap();
    assert_eq!(
        report.cluster_sizes,
        groups.iter().map(|g| g.observed.len()).collect::<Vec<_>>()
    );
}

#[test]
fn tiny_cluster_is_memorized() {
    // Five isolated rows with arbitrary targets next to a large, smooth cluster.
    let far = uniform(5, 4, 12) + 20.0;
    let near = uniform(60, 4, 13);
    let x = ndarray::concatenate![ndarray::Axis(0), near.view(), far.view()];
    let mut y: Vec<f64> = near.rows().into_iter().map(|r| r.sum()).collect();
    y.extend([3.0, -1.0, 7.5, 0.2, 4.4]);
    let data = Dataset::from_parts(x.clone(), Array1::from(y.clone())).unwrap();
    let grid = GridSpec {
        neurons: 12..=12,
        folds: 5,
        limits: TrainLimits {
            max_iter: 500,
            ..Default::default()
        },
        ..quick_grid(0)
    };
    let model = train_hybrid(&data, &HybridConfig::new(ClusterKind::KMeans, 2, grid, 0)).unwrap();
    let tiny = model.predict(&x.row(60).to_vec()).unwrap().cluster;
    assert_eq!(model.cluster_sizes[tiny], 5);
    for i in 60..65 {
        let p = model.predict(&x.row(i).to_vec()).unwrap();
        assert_eq!(p.cluster, tiny);
        assert!(
            (p.value - y[i]).abs() < 1e-3,
            "row {i}: {} vs {}",
            p.value,
            y[i]
        );
    }
}

#[test]
fn each_cluster_uses_its_own_network() {
    let (train, val, _) = synthetic_split(400, 5);
    let model = train_hybrid(
        &train,
        &HybridConfig::new(ClusterKind::KMeans, 4, quick_grid(2), 5),
    )
    .unwrap();
    assert_eq!(model.locals.len(), 4);
    for a in 0..4 {
        for b in a + 1..4 {
            assert_ne!(model.locals[a].mlp.w1, model.locals[b].mlp.w1);
        }
    }
    for row in val.features().rows() {
        let raw = row.to_vec();
        let p = model.predict(&raw).unwrap();
        let scaled = model.scaler.transform_row(&raw).unwrap();
        let direct = model.locals[p.cluster].mlp.forward(&scaled).unwrap();
        assert_eq!(p.value, model.target_scaler.unscale(direct));
    }
}

#[test]
fn comparison_covers_kinds_and_isolates_failures() {
    let (train, val, _) = synthetic_split(300, 8);
    let base = HybridConfig::new(ClusterKind::KMeans, 4, quick_grid(4), 8);
    let (cmp, models) = compare_methods(&train, &val, &ClusterKind::ALL, &base);
    assert_eq!(cmp.entries.len(), 4);
    assert_eq!(models.len(), 4);
    for (e, kind) in cmp.entries.iter().zip(ClusterKind::ALL) {
        assert_eq!(e.kind, kind);
        let r = e.outcome.as_ref().unwrap();
        assert_eq!(r.k(), 4);
        assert!(e.mse_delta_percent.unwrap() >= 0.0);
    }
    let best = cmp.best.unwrap();
    assert_eq!(cmp.entries[best].mse_delta_percent, Some(0.0));

    // Eleven rows cannot give four clusters of at least three rows each.
    let small = train.select(&(0..11).collect::<Vec<_>>()).unwrap();
    let (cmp, models) = compare_methods(&small, &val, &ClusterKind::ALL, &base);
    assert!(cmp.entries.iter().all(|e| e.outcome.is_err()));
    assert!(models.iter().all(Option::is_none));
    assert_eq!(cmp.best, None);

    let twice = [ClusterKind::KMeans, ClusterKind::KMeans];
    let (cmp, _) = compare_methods(&train, &val, &twice, &base);
    let a = cmp.entries[0].outcome.as_ref().unwrap();
    let b = cmp.entries[1].outcome.as_ref().unwrap();
    assert_eq!(a.per_cluster, b.per_cluster);
    assert_eq!(a.weighted_average, b.weighted_average);
}

#[test]
fn mixed_failures_leave_other_kinds_intact() {
    // Two tight groups plus one outlier: agglomerative single linkage isolates
    // the outlier (too small for 3 folds) while k-means does not fail.
    let mut x = Array2::zeros((31, 4));
    for i in 0..15 {
        x.row_mut(i).fill(i as f64 * 0.01);
        x.row_mut(15 + i).fill(5.0 + i as f64 * 0.01);
    }
    x.row_mut(30).fill(12.0);
    let y = Array1::from_iter((0..31).map(|i| i as f64));
    let train = Dataset::from_parts(x.clone(), y.clone()).unwrap();
    let mut base = HybridConfig::new(ClusterKind::KMeans, 2, quick_grid(0), 1);
    base.linkage = hybreg::Linkage::Single;
    let kinds = [ClusterKind::Agglomerative, ClusterKind::KMeans];
    let (cmp, models) = compare_methods(&train, &train, &kinds, &base);
    assert!(cmp.entries[0].outcome.is_err());
    assert!(models[0].is_none());
    assert!(cmp.entries[1].outcome.is_ok());
    assert_eq!(cmp.best, Some(1));
}

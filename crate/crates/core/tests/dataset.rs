mod common;

use hybreg::clustering::kmeans;
use hybreg::dataset::{split, split_indices, synthesize, Dataset, ScalerParams, SplitSpec};
use hybreg::quality::adjusted_rand_index;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

use common::config;

fn features(max_rows: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows).prop_flat_map(|n| {
        prop::collection::vec(-1e3f64..1e3, n * 4)
            .prop_map(move |v| Array2::from_shape_vec((n, 4), v).unwrap())
    })
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn scaling_round_trips(x in features(40)) {
        let s = ScalerParams::fit(&x).unwrap();
        for j in 0..4 {
            prop_assert!(s.mins[j] <= s.maxs[j]);
        }
        let scaled = s.transform(&x).unwrap();
        prop_assert!(scaled.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = s.inverse_transform(&scaled).unwrap();
        for ((a, b), j) in x.iter().zip(back.iter()).zip((0..x.len()).map(|i| i % 4)) {
            if !s.degenerate[j] {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(s.maxs[j] - s.mins[j]));
            }
        }
    }

    #[test]
    fn split_partitions_rows(n in 2usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let spec = SplitSpec { validation_fraction: frac, seed };
        match split_indices(n, &spec) {
            Ok((train, val)) => {
                prop_assert!(!train.is_empty() && !val.is_empty());
                let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!((train, val), split_indices(n, &spec).unwrap());
            }
            Err(_) => {
                let n_val = (n as f64 * frac).round() as usize;
                prop_assert!(n_val == 0 || n_val >= n);
            }
        }
    }
}

#[test]
fn split_keeps_row_multiset() {
    let x = Array2::from_shape_fn((10, 4), |(i, j)| (i * 4 + j) as f64);
    let y = Array1::from_iter((0..10).map(|i| i as f64 * 10.0));
    let data = Dataset::from_parts(x, y).unwrap();
    let (train, val) = split(&data, &SplitSpec::default()).unwrap();
    assert_eq!((train.n_samples(), val.n_samples()), (8, 2));
    let mut targets: Vec<f64> = train.target().iter().chain(val.target()).copied().collect();
    targets.sort_by(f64::total_cmp);
    assert_eq!(targets, data.target().to_vec());
    for (i, &t) in val.target().iter().enumerate() {
        let row = (t / 10.0) as usize;
        assert_eq!(val.features().row(i), data.features().row(row));
    }
}

#[test]
fn synthetic_regimes_are_recoverable() {
    let synth = synthesize(1000, 7).unwrap();
    assert_eq!(synth, synthesize(1000, 7).unwrap());
    let x = ScalerParams::fit(synth.dataset.features())
        .unwrap()
        .transform(synth.dataset.features())
        .unwrap();
    let fit = kmeans(&x, 4, 7, 300, 1e-8).unwrap();
    let ari = adjusted_rand_index(fit.assignment.labels(), &synth.regimes);
    assert!(ari >= 0.95, "{ari}");
    assert!(synthesize(5, 7).is_err());
}

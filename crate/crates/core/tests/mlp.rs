mod common;

use hybreg::mlp::lbfgs::{minimize, LbfgsOptions};
use hybreg::mlp::{
    gradient, grid_search, kfold_indices, train, Activation, GridSpec, MlpModel, Provenance,
    Solver, TrainConfig, TrainLimits,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{config, uniform};

fn model_from(p: &[f64], inputs: usize, hidden: usize, activation: Activation) -> MlpModel {
    let w1_len = hidden * inputs;
    MlpModel {
        w1: Array2::from_shape_vec((hidden, inputs), p[..w1_len].to_vec()).unwrap(),
        b1: Array1::from(p[w1_len..w1_len + hidden].to_vec()),
        w2: Array1::from(p[w1_len + hidden..w1_len + 2 * hidden].to_vec()),
        b2: p[w1_len + 2 * hidden],
        activation,
        provenance: Provenance {
            solver: Solver::Lbfgs,
            neurons: hidden,
            cv_mse: None,
            seed: 0,
        },
    }
}

fn mse(m: &MlpModel, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
    let p = m.predict(x).unwrap();
    p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Largest relative error between the analytic gradient and central
/// differences (h = 1e-5), skipping parameters of hidden units whose
/// pre-activation comes within `kink` of zero on some row.
fn gradient_error(seed: u64, activation: Activation, kink: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (f, h, m) = (4, rng.random_range(1..8), rng.random_range(1..12));
    let n_params = h * f + 2 * h + 1;
    let p: Vec<f64> = (0..n_params).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Array2::from_shape_fn((m, f), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));
    let model = model_from(&p, f, h, activation);
    let g = gradient(&model, &x, &y).unwrap().to_flat();

    let pre = x.dot(&model.w1.t()) + &model.b1;
    let near_kink: Vec<bool> = (0..h)
        .map(|j| pre.column(j).iter().any(|z| z.abs() < kink))
        .collect();
    let unit_of = |i: usize| -> Option<usize> {
        if i < h * f {
            Some(i / f)
        } else if i < h * f + h {
            Some(i - h * f)
        } else {
            None
        }
    };

    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..n_params {
        if unit_of(i).is_some_and(|j| near_kink[j]) {
            continue;
        }
        let mut plus = p.clone();
        plus[i] += step;
        let mut minus = p.clone();
        minus[i] -= step;
        let fd = (mse(&model_from(&plus, f, h, activation), &x, &y)
            - mse(&model_from(&minus, f, h, activation), &x, &y))
            / (2.0 * step);
        let scale = g[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((g[i] - fd).abs() / scale);
    }
    worst
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn tanh_gradient_matches_differences(seed in any::<u64>()) {
        let e = gradient_error(seed, Activation::Tanh, 0.0);
        prop_assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn relu_gradient_matches_differences_off_kinks(seed in any::<u64>()) {
        // A 1e-5 step moves a pre-activation by at most 4e-5 here.
        let e = gradient_error(seed, Activation::Relu, 1e-4);
        prop_assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn folds_are_shared_partitions(n in 5usize..200, folds in 2usize..6, seed in any::<u64>()) {
        prop_assume!(folds <= n);
        let a = kfold_indices(n, folds, seed).unwrap();
        let mut all: Vec<usize> = a.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(a, kfold_indices(n, folds, seed).unwrap());
    }
}

#[test]
fn lbfgs_history_never_increases() {
    let x = uniform(150, 4, 2);
    let y = x.column(0).mapv(|v| (4.0 * v).sin()) + x.column(2).mapv(|v| v * v);
    for activation in [Activation::Tanh, Activation::Relu, Activation::Identity] {
        let cfg = TrainConfig {
            neurons: 10,
            activation,
            solver: Solver::Lbfgs,
            seed: 5,
            limits: TrainLimits::default(),
        };
        let (_, report) = train(&x, &y, &cfg).unwrap();
        for w in report.loss_history.windows(2) {
            assert!(w[1] <= w[0], "{activation}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn lbfgs_solves_linear_least_squares() {
    // Convex quadratic: MSE of a linear model (weights + bias) on fixed data.
    let x = uniform(80, 4, 9);
    let y = x.dot(&Array1::from(vec![1.5, -2.0, 0.3, 0.8])) + 0.25;
    let objective = |p: &[f64], g: &mut [f64]| {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut f = 0.0;
        let m = x.nrows() as f64;
        for (row, &t) in x.rows().into_iter().zip(&y) {
            let pred = row.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + p[4];
            let e = pred - t;
            f += e * e / m;
            for c in 0..4 {
                g[c] += 2.0 * e * row[c] / m;
            }
            g[4] += 2.0 * e / m;
        }
        f
    };
    let opts = LbfgsOptions {
        max_iter: 50,
        grad_tol: 1e-8,
        loss_tol: 0.0,
        ..Default::default()
    };
    let out = minimize(objective, vec![0.0; 5], &opts);
    assert!(out.grad_norm < 1e-8, "{out:?}");
    assert!(out.iterations <= 50);
}

#[test]
fn lbfgs_fits_linear_target() {
    for seed in 0..5 {
        let x = uniform(200, 4, 100 + seed);
        let y = x.column(0).mapv(|v| 2.0 * v + 0.5);
        let cfg = TrainConfig {
            neurons: 12,
            activation: Activation::Tanh,
            solver: Solver::Lbfgs,
            seed,
            limits: TrainLimits {
                max_iter: 200,
                ..Default::default()
            },
        };
        let (_, report) = train(&x, &y, &cfg).unwrap();
        assert!(
            report.final_train_mse < 1e-3,
            "seed {seed}: {}",
            report.final_train_mse
        );
        assert!(report.iterations <= 200);
    }
}

#[test]
fn stochastic_solvers_reduce_loss() {
    for seed in 0..5 {
        let x = uniform(200, 4, 200 + seed);
        let y = x.column(0).mapv(|v| 2.0 * v + 0.5);
        for solver in [Solver::Sgd, Solver::Adam] {
            let cfg = TrainConfig {
                neurons: 12,
                activation: Activation::Tanh,
                solver,
                seed,
                limits: TrainLimits {
                    max_iter: 100,
                    ..Default::default()
                },
            };
            let (_, report) = train(&x, &y, &cfg).unwrap();
            assert!(
                report.final_train_mse < report.loss_history[0],
                "{solver} seed {seed}"
            );
        }
    }
}

#[test]
fn grid_winner_has_lowest_cv_error() {
    let x = uniform(90, 4, 31);
    let y = x.column(1).mapv(|v| (3.0 * v).cos()) + x.column(3);
    let grid = GridSpec {
        neurons: 3..=5,
        activations: vec![Activation::Tanh, Activation::Relu],
        solvers: vec![Solver::Lbfgs, Solver::Adam],
        folds: 3,
        seed: 8,
        limits: TrainLimits {
            max_iter: 80,
            ..Default::default()
        },
    };
    let r = grid_search(&x, &y, &grid).unwrap();
    assert_eq!(r.table.len(), 12);
    for row in &r.table {
        assert!(r.best_cv_mse <= row.mean_mse);
        assert_eq!(row.fold_mse.len(), 3);
    }
    let first_best = r
        .table
        .iter()
        .find(|row| row.mean_mse == r.best_cv_mse)
        .unwrap();
    assert_eq!(first_best.candidate, r.best);
}

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lbfgs::{self, LbfgsOptions};
use super::{loss_and_gradient, Activation, Batch, Layout, MlpModel, Provenance, Solver};
use crate::error::{check_dim, Error, Result};

/// Stopping rules and step sizes shared by the three solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLimits {
    /// L-BFGS iterations or SGD/Adam epochs.
    pub max_iter: usize,
    pub grad_tol: f64,
    pub loss_tol: f64,
    /// Mini-batch size for SGD and Adam.
    pub batch_size: usize,
    /// Overrides the solver's default step size (SGD 1e-2, Adam 1e-3).
    pub learning_rate: Option<f64>,
}

impl Default for TrainLimits {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            loss_tol: 1e-8,
            batch_size: 32,
            learning_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub neurons: usize,
    pub activation: Activation,
    pub solver: Solver,
    pub seed: u64,
    pub limits: TrainLimits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full-data MSE of the returned parameters.
    pub final_train_mse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Full-data MSE at the start and after every iteration/epoch.
    pub loss_history: Vec<f64>,
}

const SGD_LEARNING_RATE: f64 = 1e-2;
const SGD_MOMENTUM: f64 = 0.9;
const ADAM_LEARNING_RATE: f64 = 1e-3;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// Glorot-uniform weights and biases drawn from `U(-b, b)`,
/// `b = sqrt(6 / (fan_in + fan_out))` per layer.
fn initial_parameters(layout: Layout, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden_bound = (6.0 / (layout.inputs + layout.hidden) as f64).sqrt();
    let out_bound = (6.0 / (layout.hidden + 1) as f64).sqrt();
    let n_hidden_params = layout.hidden * layout.inputs + layout.hidden;
    (0..layout.len())
        .map(|i| {
            let b = if i < n_hidden_params {
                hidden_bound
            } else {
                out_bound
            };
            rng.random_range(-b..b)
        })
        .collect()
}

/// Trains a one-hidden-layer regressor on `(x, y)` and returns the
/// lowest-loss parameters seen.
///
/// A non-finite loss stops training with `converged = false`.
pub fn train(
    x: &Array2<f64>,
    y: &Array1<f64>,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    check_dim(x.nrows(), y.len())?;
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.neurons == 0 {
        return Err(Error::InvalidParameter(
            "the hidden layer needs at least one neuron".into(),
        ));
    }
    if config.limits.batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch size must be positive".into(),
        ));
    }
    let layout = Layout {
        inputs: x.ncols(),
        hidden: config.neurons,
    };
    let y = y.as_standard_layout();
    let batch = Batch::new(x, y.as_slice().expect("contiguous"));
    let p0 = initial_parameters(layout, config.seed);
    let (params, report) = match config.solver {
        Solver::Lbfgs => run_lbfgs(layout, config, &batch, p0),
        Solver::Sgd | Solver::Adam => run_stochastic(layout, config, &batch, p0),
    };
    let provenance = Provenance {
        solver: config.solver,
        neurons: config.neurons,
        cv_mse: None,
        seed: config.seed,
    };
    Ok((
        MlpModel::from_flat(layout, &params, config.activation, provenance),
        report,
    ))
}

fn run_lbfgs(
    layout: Layout,
    config: &TrainConfig,
    batch: &Batch<'_>,
    p0: Vec<f64>,
) -> (Vec<f64>, TrainReport) {
    let opts = LbfgsOptions {
        max_iter: config.limits.max_iter,
        grad_tol: config.limits.grad_tol,
        loss_tol: config.limits.loss_tol,
        ..LbfgsOptions::default()
    };
    let act = config.activation;
    let out = lbfgs::minimize(
        |p, g| loss_and_gradient(layout, act, p, batch, None, g),
        p0.clone(),
        &opts,
    );
    if !out.f.is_finite() {
        let mut g = vec![0.0; layout.len()];
        let f0 = loss_and_gradient(layout, act, &p0, batch, None, &mut g);
        return (
            p0,
            TrainReport {
                final_train_mse: f0,
                iterations: out.iterations,
                converged: false,
                loss_history: vec![f0],
            },
        );
    }
    (
        out.x,
        TrainReport {
            final_train_mse: out.f,
            iterations: out.iterations,
            converged: out.converged,
            loss_history: out.history,
        },
    )
}

fn run_stochastic(
    layout: Layout,
    config: &TrainConfig,
    batch: &Batch<'_>,
    mut params: Vec<f64>,
) -> (Vec<f64>, TrainReport) {
    let limits = &config.limits;
    let act = config.activation;
    let n_params = layout.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_5eed);
    let mut grad = vec![0.0; n_params];
    let mut velocity = vec![0.0; n_params];
    let mut second = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let lr = limits.learning_rate.unwrap_or(match config.solver {
        Solver::Adam => ADAM_LEARNING_RATE,
        _ => SGD_LEARNING_RATE,
    });

    let mut loss = loss_and_gradient(layout, act, &params, batch, None, &mut grad);
    let mut history = vec![loss];
    let mut best = (loss, params.clone());
    let mut converged = false;
    let mut epochs = 0;
    let mut t = 0i32;

    if !loss.is_finite() {
        return (
            params,
            TrainReport {
                final_train_mse: loss,
                iterations: 0,
                converged: false,
                loss_history: history,
            },
        );
    }

    while epochs < limits.max_iter {
        order.shuffle(&mut rng);
        for chunk in order.chunks(limits.batch_size) {
            loss_and_gradient(layout, act, &params, batch, Some(chunk), &mut grad);
            match config.solver {
                Solver::Adam => {
                    t += 1;
                    let c1 = 1.0 - ADAM_BETA1.powi(t);
                    let c2 = 1.0 - ADAM_BETA2.powi(t);
                    for i in 0..n_params {
                        velocity[i] = ADAM_BETA1 * velocity[i] + (1.0 - ADAM_BETA1) * grad[i];
                        second[i] = ADAM_BETA2 * second[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                        params[i] -=
                            lr * (velocity[i] / c1) / ((second[i] / c2).sqrt() + ADAM_EPSILON);
                    }
                }
                _ => {
                    for i in 0..n_params {
                        velocity[i] = SGD_MOMENTUM * velocity[i] - lr * grad[i];
                        params[i] += velocity[i];
                    }
                }
            }
        }
        epochs += 1;
        let prev = loss;
        loss = loss_and_gradient(layout, act, &params, batch, None, &mut grad);
        if !loss.is_finite() {
            break;
        }
        history.push(loss);
        if loss < best.0 {
            best = (loss, params.clone());
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < limits.grad_tol
            || (prev - loss).abs() <= limits.loss_tol * prev.abs().max(loss.abs())
        {
            converged = true;
            break;
        }
    }
    let (final_loss, best_params) = best;
    (
        best_params,
        TrainReport {
            final_train_mse: final_loss,
            iterations: epochs,
            converged,
            loss_history: history,
        },
    )
}

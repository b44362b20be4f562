use std::ops::RangeInclusive;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, Activation, MlpModel, Solver, TrainConfig, TrainLimits};
use crate::error::{check_dim, Error, Result};

/// Hyperparameter grid searched by k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub neurons: RangeInclusive<usize>,
    pub activations: Vec<Activation>,
    pub solvers: Vec<Solver>,
    pub folds: usize,
    pub seed: u64,
    pub limits: TrainLimits,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            neurons: 12..=30,
            activations: vec![Activation::Tanh, Activation::Relu],
            solvers: vec![Solver::Lbfgs, Solver::Sgd, Solver::Adam],
            folds: 5,
            seed: 42,
            limits: TrainLimits::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub neurons: usize,
    pub activation: Activation,
    pub solver: Solver,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.neurons.is_empty() || *self.neurons.start() == 0 {
            return Err(Error::InvalidParameter(format!(
                "neuron range {}..={} is empty or starts at 0",
                self.neurons.start(),
                self.neurons.end()
            )));
        }
        if self.activations.is_empty() || self.solvers.is_empty() {
            return Err(Error::InvalidParameter(
                "grid needs at least one activation and one solver".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }

    /// Candidates in tie-break order: fewer neurons first, then
    /// tanh < relu, then lbfgs < sgd < adam.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut acts = self.activations.clone();
        acts.sort();
        acts.dedup();
        let mut solvers = self.solvers.clone();
        solvers.sort();
        solvers.dedup();
        let mut out = Vec::new();
        for neurons in self.neurons.clone() {
            for &activation in &acts {
                for &solver in &solvers {
                    out.push(Candidate {
                        neurons,
                        activation,
                        solver,
                    });
                }
            }
        }
        out
    }

    pub fn train_config(&self, c: &Candidate) -> TrainConfig {
        TrainConfig {
            neurons: c.neurons,
            activation: c.activation,
            solver: c.solver,
            seed: self.seed,
            limits: self.limits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub candidate: Candidate,
    pub fold_mse: Vec<f64>,
    /// Mean validation MSE over folds; infinite if any fold diverged.
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Candidate,
    pub best_cv_mse: f64,
    /// One row per candidate, in candidate order.
    pub table: Vec<CvRow>,
}

/// Validation indices of each fold: a seeded shuffle dealt into `folds`
/// contiguous blocks whose sizes differ by at most one.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidParameter(format!(
            "{folds}-fold cross-validation is impossible with {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}

fn validation_mse(model: &MlpModel, x: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
    let pred = model.predict(x)?;
    Ok(pred
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64)
}

/// Cross-validates every candidate on the same folds and returns the one
/// with the lowest mean validation MSE (ties in candidate order).
pub fn grid_search(x: &Array2<f64>, y: &Array1<f64>, grid: &GridSpec) -> Result<GridResult> {
    grid.validate()?;
    check_dim(x.nrows(), y.len())?;
    let n = y.len();
    let folds = kfold_indices(n, grid.folds, grid.seed)?;
    let splits: Vec<_> = folds
        .iter()
        .map(|val| {
            let mut is_val = vec![false; n];
            val.iter().for_each(|&i| is_val[i] = true);
            let train_idx: Vec<usize> = (0..n).filter(|&i| !is_val[i]).collect();
            (
                x.select(Axis(0), &train_idx),
                y.select(Axis(0), &train_idx),
                x.select(Axis(0), val),
                y.select(Axis(0), val),
            )
        })
        .collect();

    let mut table = Vec::new();
    let mut best: Option<(Candidate, f64)> = None;
    for candidate in grid.candidates() {
        let config = grid.train_config(&candidate);
        let mut fold_mse = Vec::with_capacity(splits.len());
        for (xt, yt, xv, yv) in &splits {
            let (model, report) = train(xt, yt, &config)?;
            let mse = if report.final_train_mse.is_finite() {
                validation_mse(&model, xv, yv)?
            } else {
                f64::INFINITY
            };
            fold_mse.push(if mse.is_finite() { mse } else { f64::INFINITY });
        }
        let mean_mse = fold_mse.iter().sum::<f64>() / fold_mse.len() as f64;
        log::debug!(
            "cv {} neurons {} {}: {mean_mse:.6e}",
            candidate.neurons,
            candidate.activation,
            candidate.solver
        );
        if mean_mse.is_finite() && best.is_none_or(|(_, b)| mean_mse < b) {
            best = Some((candidate, mean_mse));
        }
        table.push(CvRow {
            candidate,
            fold_mse,
            mean_mse,
        });
    }
    let (best, best_cv_mse) = best.ok_or(Error::AllCandidatesDiverged)?;
    Ok(GridResult {
        best,
        best_cv_mse,
        table,
    })
}

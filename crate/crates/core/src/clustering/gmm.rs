use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{kmeans, ClusterAssignment, ClusterFit, ClusterKind, ClusterModel};
use crate::error::{check_dim, Error, Result};
use crate::linalg::row;

/// Added to every covariance diagonal after each M-step.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-6;

/// Mixture weights, component means (K x F) and full covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Array2<f64>,
    pub covariances: Vec<Array2<f64>>,
}

/// Components with precomputed Cholesky factors.
pub(crate) struct Prepared {
    log_weights: Vec<f64>,
    means: Array2<f64>,
    /// Row-major lower-triangular factors.
    chol: Vec<Vec<f64>>,
    log_norm: Vec<f64>,
    dim: usize,
}

impl GmmParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn prepare(&self) -> Result<Prepared> {
        let dim = self.means.ncols();
        let mut chol = Vec::with_capacity(self.k());
        let mut log_norm = Vec::with_capacity(self.k());
        for (j, cov) in self.covariances.iter().enumerate() {
            check_dim(dim, cov.nrows())?;
            let m = DMatrix::from_fn(dim, dim, |r, c| cov[[r, c]]);
            let l = nalgebra::Cholesky::new(m)
                .ok_or_else(|| Error::NotPositiveDefinite(format!("covariance of component {j}")))?
                .unpack();
            let log_det: f64 = 2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>();
            log_norm.push(-0.5 * (dim as f64 * (2.0 * PI).ln() + log_det));
            let mut flat = vec![0.0; dim * dim];
            for r in 0..dim {
                for c in 0..=r {
                    flat[r * dim + c] = l[(r, c)];
                }
            }
            chol.push(flat);
        }
        Ok(Prepared {
            log_weights: self.weights.iter().map(|w| w.ln()).collect(),
            means: self.means.as_standard_layout().into_owned(),
            chol,
            log_norm,
            dim,
        })
    }

    /// Posterior responsibilities (N x K) and the mean per-sample
    /// log-likelihood of `data`.
    pub fn responsibilities(&self, data: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
        let p = self.prepare()?;
        check_dim(p.dim, data.ncols())?;
        let data = data.as_standard_layout().into_owned();
        let mut resp = Array2::zeros((data.nrows(), self.k()));
        let ll = p.e_step(&data, &mut resp);
        Ok((resp, ll))
    }

    pub(crate) fn most_probable(&self, x: &[f64]) -> Result<usize> {
        let p = self.prepare()?;
        Ok(argmax(&p.weighted_log_densities(x)))
    }
}

impl Prepared {
    /// `log w_j + log N(x | mu_j, Sigma_j)` for every component.
    fn weighted_log_densities(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        (0..self.log_weights.len())
            .map(|j| {
                let l = &self.chol[j];
                let mu = row(&self.means, j);
                // Forward substitution: L z = x - mu.
                let mut maha = 0.0;
                for r in 0..self.dim {
                    let mut s = x[r] - mu[r];
                    for c in 0..r {
                        s -= l[r * self.dim + c] * z[c];
                    }
                    z[r] = s / l[r * self.dim + r];
                    maha += z[r] * z[r];
                }
                self.log_weights[j] + self.log_norm[j] - 0.5 * maha
            })
            .collect()
    }

    pub(crate) fn most_probable_rows(&self, data: &Array2<f64>) -> Result<Vec<usize>> {
        check_dim(self.dim, data.ncols())?;
        let data = data.as_standard_layout();
        Ok((0..data.nrows())
            .map(|i| {
                argmax(
                    &self.weighted_log_densities(data.row(i).as_slice().expect("standard layout")),
                )
            })
            .collect())
    }

    /// Fills `resp` with posterior responsibilities and returns the mean
    /// per-sample log-likelihood.
    fn e_step(&self, data: &Array2<f64>, resp: &mut Array2<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..data.nrows() {
            let logp = self.weighted_log_densities(row(data, i));
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logp.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            total += lse;
            for (j, v) in logp.iter().enumerate() {
                resp[[i, j]] = (v - lse).exp();
            }
        }
        total / data.nrows() as f64
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = j;
        }
    }
    best
}

fn m_step(data: &Array2<f64>, resp: &Array2<f64>) -> GmmParams {
    let (n, d) = data.dim();
    let k = resp.ncols();
    let nk: Array1<f64> = resp
        .sum_axis(ndarray::Axis(0))
        .mapv(|v| v + 10.0 * f64::EPSILON);
    let total: f64 = nk.sum();
    let weights = nk.iter().map(|v| v / total).collect();
    let mut means = Array2::zeros((k, d));
    for i in 0..n {
        let x = row(data, i);
        for j in 0..k {
            let r = resp[[i, j]];
            for c in 0..d {
                means[[j, c]] += r * x[c];
            }
        }
    }
    for j in 0..k {
        for c in 0..d {
            means[[j, c]] /= nk[j];
        }
    }
    let mut covariances = vec![Array2::zeros((d, d)); k];
    let mut diff = vec![0.0; d];
    for i in 0..n {
        let x = row(data, i);
        for j in 0..k {
            let r = resp[[i, j]];
            if r == 0.0 {
                continue;
            }
            for c in 0..d {
                diff[c] = x[c] - means[[j, c]];
            }
            let cov = &mut covariances[j];
            for a in 0..d {
                for b in 0..=a {
                    cov[[a, b]] += r * diff[a] * diff[b];
                }
            }
        }
    }
    for (j, cov) in covariances.iter_mut().enumerate() {
        for a in 0..d {
            for b in 0..=a {
                let v = cov[[a, b]] / nk[j];
                cov[[a, b]] = v;
                cov[[b, a]] = v;
            }
            cov[[a, a]] += COVARIANCE_REGULARIZATION;
        }
    }
    GmmParams {
        weights,
        means,
        covariances,
    }
}

/// Full-covariance Gaussian mixture fitted by expectation-maximization,
/// initialized from a k-means partition.
///
/// Iterates until the gain in mean per-sample log-likelihood drops below
/// `tol` or `max_iter` E-steps have run. The trace records the mean
/// log-likelihood at every E-step. Labels are the most responsible
/// component of each sample.
pub fn gaussian_mixture(
    data: &Array2<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterFit> {
    let n = data.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::InvalidParameter(format!(
            "gaussian mixture needs more samples ({n}) than components ({k})"
        )));
    }
    let data = data.as_standard_layout().into_owned();
    let init = kmeans(&data, k, seed, 300, 1e-8)?;
    let mut resp = Array2::zeros((n, k));
    for (i, &l) in init.assignment.labels().iter().enumerate() {
        resp[[i, l]] = 1.0;
    }
    let mut params = m_step(&data, &resp);
    let mut trace: Vec<f64> = Vec::new();
    for iter in 0..max_iter.max(1) {
        let ll = params.prepare()?.e_step(&data, &mut resp);
        if !ll.is_finite() {
            return Err(Error::Diverged(
                "gaussian mixture log-likelihood is not finite".into(),
            ));
        }
        let done = trace.last().is_some_and(|prev| ll - prev < tol);
        trace.push(ll);
        if done || iter + 1 == max_iter.max(1) {
            break;
        }
        params = m_step(&data, &resp);
    }
    let labels: Vec<usize> = resp
        .rows()
        .into_iter()
        .map(|r| argmax(r.as_slice().expect("standard layout")))
        .collect();
    let assignment = ClusterAssignment::new(labels, k)?;
    let model = ClusterModel {
        kind: ClusterKind::GaussianMixture,
        k,
        centroids: params.means.clone(),
        gmm: Some(params),
        seed,
    };
    Ok(ClusterFit {
        model,
        assignment,
        trace,
    })
}

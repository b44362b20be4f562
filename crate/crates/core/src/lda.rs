//! Two-dimensional Fisher discriminant projection with cluster labels as
//! classes, used to visualize clusterings of the 4-D inputs.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAssignment;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{inverse_sqrt_spd, mean_of_rows, symmetric_eigen, to_nalgebra};

/// Added to the within-class scatter diagonal before whitening.
pub const WITHIN_SCATTER_REGULARIZATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaProjection {
    /// F x 2, unit-length columns.
    pub basis: Array2<f64>,
    /// K x F.
    pub class_means: Array2<f64>,
    pub global_mean: Array1<f64>,
}

/// Within-class and between-class scatter matrices.
pub fn scatter_matrices(
    data: &Array2<f64>,
    assignment: &ClusterAssignment,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dim(data.nrows(), assignment.len())?;
    let d = data.ncols();
    let global = DMatrix::from_vec(d, 1, mean_of_rows(data.view(), 0..data.nrows()));
    let means: Vec<DMatrix<f64>> = (0..assignment.k())
        .map(|j| DMatrix::from_vec(d, 1, mean_of_rows(data.view(), assignment.members(j))))
        .collect();
    let mut within = DMatrix::zeros(d, d);
    for (i, &l) in assignment.labels().iter().enumerate() {
        let x = DMatrix::from_iterator(d, 1, data.row(i).iter().copied());
        let diff = x - &means[l];
        within += &diff * diff.transpose();
    }
    let mut between = DMatrix::zeros(d, d);
    for (m, &n) in means.iter().zip(assignment.sizes()) {
        let diff = m - &global;
        between += (&diff * diff.transpose()) * n as f64;
    }
    Ok((within, between))
}

/// `trace((W' Sw W)^{-1} W' Sb W)` for a F x m projection `basis`.
pub fn fisher_criterion(
    data: &Array2<f64>,
    assignment: &ClusterAssignment,
    basis: &Array2<f64>,
) -> Result<f64> {
    check_dim(data.ncols(), basis.nrows())?;
    let (within, between) = scatter_matrices(data, assignment)?;
    let w = to_nalgebra(basis.view());
    let pw = w.transpose() * within * &w;
    let pb = w.transpose() * between * &w;
    let inv = pw
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("projected within-class scatter is singular".into()))?;
    Ok((inv * pb).trace())
}

/// Solves the generalized between/within scatter eigenproblem through the
/// symmetric matrix `Sw^{-1/2} Sb Sw^{-1/2}` and keeps the two leading
/// directions. With two classes the between-class scatter has rank one and
/// the second axis is the next eigenvector, which is orthogonal to the first
/// in the whitened space.
pub fn fit_lda(data: &Array2<f64>, assignment: &ClusterAssignment) -> Result<LdaProjection> {
    let k = assignment.k();
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "LDA needs at least 2 classes, got {k}"
        )));
    }
    if data.ncols() < 2 {
        return Err(Error::InvalidParameter(
            "LDA projection to 2-D needs at least 2 features".into(),
        ));
    }
    if let Some(j) = assignment.sizes().iter().position(|&s| s < 2) {
        return Err(Error::InvalidParameter(format!(
            "class {j} has fewer than 2 members"
        )));
    }
    let d = data.ncols();
    let (mut within, between) = scatter_matrices(data, assignment)?;
    for i in 0..d {
        within[(i, i)] += WITHIN_SCATTER_REGULARIZATION;
    }
    let whiten = inverse_sqrt_spd(&within)?;
    let m = &whiten * between * &whiten;
    let sym = (&m + m.transpose()) * 0.5;
    let eig = symmetric_eigen(sym)?;
    let mut basis = Array2::zeros((d, 2));
    for c in 0..2 {
        let v = &whiten * eig.vectors.column(c);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("discriminant direction vanished".into()));
        }
        // Sign convention: largest-magnitude component positive.
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            basis[[r, c]] = sign * v[r] / norm;
        }
    }
    let mut class_means = Array2::zeros((k, d));
    for j in 0..k {
        let mean = mean_of_rows(data.view(), assignment.members(j));
        class_means.row_mut(j).assign(&Array1::from(mean));
    }
    Ok(LdaProjection {
        basis,
        class_means,
        global_mean: Array1::from(mean_of_rows(data.view(), 0..data.nrows())),
    })
}

impl LdaProjection {
    /// Maps rows to `(x - global_mean) * basis`.
    pub fn project(&self, data: &Array2<f64>) -> Result<Array2<f64>> {
        check_dim(self.global_mean.len(), data.ncols())?;
        let centered = data - &self.global_mean;
        Ok(centered.dot(&self.basis))
    }
}

pub fn project(p: &LdaProjection, data: &Array2<f64>) -> Result<Array2<f64>> {
    p.project(data)
}

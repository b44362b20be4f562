//! Small dense linear-algebra helpers shared by the spectral and LDA code.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted in
/// descending order (ties keep solver order). Column `i` of `vectors`
/// belongs to `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::Eigen(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let eig = nalgebra::SymmetricEigen::try_new(m, EIGEN_TOL, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Eigen("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok(SymmetricEigen { values, vectors })
}

/// `m^{-1/2}` of a symmetric positive definite matrix.
pub fn inverse_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(m.clone())?;
    if let Some(&smallest) = eig.values.last() {
        if smallest <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {smallest:e}"
            )));
        }
    }
    let n = m.nrows();
    let d = DVector::from_iterator(n, eig.values.iter().map(|v| 1.0 / v.sqrt()));
    let v = &eig.vectors;
    Ok(v * DMatrix::from_diagonal(&d) * v.transpose())
}

pub fn to_nalgebra(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[[r, c]])
}

pub fn to_ndarray(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)])
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn row(a: &Array2<f64>, i: usize) -> &[f64] {
    let n = a.ncols();
    &a.as_slice().expect("standard layout")[i * n..(i + 1) * n]
}

/// Column means of the rows listed in `members`.
pub(crate) fn mean_of_rows(
    a: ArrayView2<f64>,
    members: impl IntoIterator<Item = usize>,
) -> Vec<f64> {
    let mut sum = vec![0.0; a.ncols()];
    let mut count = 0usize;
    for i in members {
        for (s, v) in sum.iter_mut().zip(a.row(i)) {
            *s += v;
        }
        count += 1;
    }
    if count > 0 {
        sum.iter_mut().for_each(|s| *s /= count as f64);
    }
    sum
}

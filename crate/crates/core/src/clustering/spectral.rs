use nalgebra::DMatrix;
use ndarray::Array2;

use super::{kmeans, ClusterAssignment, ClusterFit, ClusterKind, ClusterModel};
use crate::error::{Error, Result};
use crate::linalg::{distance, row, squared_distance, symmetric_eigen};

/// Dense Gaussian-kernel affinity graph with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub affinity: Array2<f64>,
    pub degree: Vec<f64>,
    pub gamma: f64,
}

/// Median of all pairwise Euclidean distances.
fn median_distance(data: &Array2<f64>) -> f64 {
    let n = data.nrows();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(distance(row(data, i), row(data, j)));
        }
    }
    let mid = d.len() / 2;
    let (_, upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if d.len() % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// `affinity[i][j] = exp(-gamma * |x_i - x_j|^2)` for `i != j`, zero on the
/// diagonal. Without an explicit `gamma` the kernel width is
/// `1 / (2 sigma^2)` with `sigma` the median pairwise distance.
pub fn build_similarity_graph(data: &Array2<f64>, gamma: Option<f64>) -> Result<SimilarityGraph> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "similarity graph needs at least 2 samples".into(),
        ));
    }
    let data = data.as_standard_layout().into_owned();
    let gamma = match gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {g}"
            )))
        }
        None => {
            let sigma = median_distance(&data);
            if sigma == 0.0 {
                return Err(Error::Degenerate("median pairwise distance is zero".into()));
            }
            1.0 / (2.0 * sigma * sigma)
        }
    };
    let mut affinity = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let a = (-gamma * squared_distance(row(&data, i), row(&data, j))).exp();
            affinity[[i, j]] = a;
            affinity[[j, i]] = a;
        }
    }
    let degree = affinity.rows().into_iter().map(|r| r.sum()).collect();
    Ok(SimilarityGraph {
        affinity,
        degree,
        gamma,
    })
}

/// Normalized spectral clustering: the top `k` eigenvectors of
/// `D^{-1/2} A D^{-1/2}`, row-normalized, clustered with k-means.
///
/// The model keeps member means in the input space so unseen rows can be
/// routed by nearest centroid.
pub fn spectral(data: &Array2<f64>, k: usize, seed: u64, gamma: Option<f64>) -> Result<ClusterFit> {
    let n = data.nrows();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "spectral clustering needs 2 <= k <= {n}, got {k}"
        )));
    }
    let embedding = spectral_embedding(data, k, gamma)?;
    let inner = kmeans(&embedding, k, seed, 300, 1e-10)?;
    let assignment = ClusterAssignment::new(inner.assignment.labels().to_vec(), k)?;
    let model = ClusterModel::from_assignment(ClusterKind::Spectral, data, &assignment, seed);
    Ok(ClusterFit {
        model,
        assignment,
        trace: inner.trace,
    })
}

/// Rows of the unit-normalized N x k eigenvector embedding.
pub(crate) fn spectral_embedding(
    data: &Array2<f64>,
    k: usize,
    gamma: Option<f64>,
) -> Result<Array2<f64>> {
    let graph = build_similarity_graph(data, gamma)?;
    let n = data.nrows();
    if let Some(i) = graph.degree.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Degenerate(format!(
            "sample {i} has no affinity to any other sample"
        )));
    }
    let inv_sqrt: Vec<f64> = graph.degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        inv_sqrt[i] * graph.affinity[[i, j]] * inv_sqrt[j]
    });
    let eig = symmetric_eigen(m)?;
    let mut embedding = Array2::zeros((n, k));
    for i in 0..n {
        let norm = (0..k)
            .map(|c| eig.vectors[(i, c)].powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for c in 0..k {
                embedding[[i, c]] = eig.vectors[(i, c)] / norm;
            }
        }
    }
    Ok(embedding)
}

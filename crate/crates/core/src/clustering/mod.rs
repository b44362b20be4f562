//! The four clustering algorithms and the out-of-sample router.
//!
//! Every fitting function returns a [`ClusterFit`]: the fitted
//! [`ClusterModel`], the per-sample [`ClusterAssignment`] and a convergence
//! trace (inertia per Lloyd iteration for k-means, mean log-likelihood per EM
//! iteration for Gaussian mixtures, empty for the others).

mod agglomerative;
mod gmm;
mod kmeans;
mod spectral;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use agglomerative::{agglomerative, Dendrogram, Linkage, Merge};
pub use gmm::{gaussian_mixture, GmmParams};
pub use kmeans::{inertia, kmeans, kmeans_with_restarts, KMEANS_RESTARTS};
pub use spectral::{build_similarity_graph, spectral, SimilarityGraph};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{mean_of_rows, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKind {
    #[serde(rename = "kmeans")]
    KMeans,
    GaussianMixture,
    Agglomerative,
    Spectral,
}

impl ClusterKind {
    pub const ALL: [ClusterKind; 4] = [
        ClusterKind::GaussianMixture,
        ClusterKind::Spectral,
        ClusterKind::Agglomerative,
        ClusterKind::KMeans,
    ];

    /// Identifier used on the command line and in structured reports.
    pub fn id(self) -> &'static str {
        match self {
            ClusterKind::KMeans => "kmeans",
            ClusterKind::GaussianMixture => "gaussian_mixture",
            ClusterKind::Agglomerative => "agglomerative",
            ClusterKind::Spectral => "spectral",
        }
    }

    /// Human readable name used in the text tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ClusterKind::KMeans => "K-Means",
            ClusterKind::GaussianMixture => "Gaussian Mixture",
            ClusterKind::Agglomerative => "Agglomerative Clustering",
            ClusterKind::Spectral => "Spectral Clustering",
        }
    }
}

impl fmt::Display for ClusterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ClusterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "kmeans" | "k_means" => Ok(ClusterKind::KMeans),
            "gaussian_mixture" | "gmm" | "gaussian" => Ok(ClusterKind::GaussianMixture),
            "agglomerative" | "hierarchical" => Ok(ClusterKind::Agglomerative),
            "spectral" => Ok(ClusterKind::Spectral),
            other => Err(Error::InvalidParameter(format!(
                "unknown clustering kind `{other}`"
            ))),
        }
    }
}

/// Per-sample cluster labels with exactly `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
    sizes: Vec<usize>,
}

impl ClusterAssignment {
    /// Fails with [`Error::EmptyCluster`] unless every id in `0..k` is used.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::InvalidParameter(format!(
                    "label {l} out of range for k = {k}"
                )));
            }
            sizes[l] += 1;
        }
        let found = sizes.iter().filter(|&&s| s > 0).count();
        if found != k {
            return Err(Error::EmptyCluster { expected: k, found });
        }
        Ok(Self { labels, k, sizes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sample indices of cluster `j`, ascending.
    pub fn members(&self, j: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == j).then_some(i))
            .collect()
    }
}

/// A fitted clustering, able to route unseen rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub kind: ClusterKind,
    pub k: usize,
    /// K x F. Cluster means in the (scaled) input space for every kind.
    pub centroids: Array2<f64>,
    pub gmm: Option<GmmParams>,
    pub seed: u64,
}

impl ClusterModel {
    pub(crate) fn from_assignment(
        kind: ClusterKind,
        data: &Array2<f64>,
        assignment: &ClusterAssignment,
        seed: u64,
    ) -> Self {
        let k = assignment.k();
        let mut centroids = Array2::zeros((k, data.ncols()));
        for j in 0..k {
            let mean = mean_of_rows(data.view(), assignment.members(j));
            centroids
                .row_mut(j)
                .assign(&ndarray::ArrayView1::from(&mean));
        }
        Self {
            kind,
            k,
            centroids,
            gmm: None,
            seed,
        }
    }

    pub fn n_features(&self) -> usize {
        self.centroids.ncols()
    }

    /// Cluster id for one scaled feature row. Gaussian mixtures route by
    /// maximum posterior, every other kind by nearest centroid; ties go to
    /// the lowest id.
    pub fn route(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.n_features(), x.len())?;
        match &self.gmm {
            Some(g) => g.most_probable(x),
            None => Ok(nearest_centroid(&self.centroids, x).0),
        }
    }

    pub fn route_all(&self, data: &Array2<f64>) -> Result<Vec<usize>> {
        check_dim(self.n_features(), data.ncols())?;
        match &self.gmm {
            Some(g) => g.prepare()?.most_probable_rows(data),
            None => Ok(data
                .rows()
                .into_iter()
                .map(|r| nearest_centroid(&self.centroids, &r.to_vec()).0)
                .collect()),
        }
    }
}

/// (index, squared distance) of the closest row of `centroids`.
pub(crate) fn nearest_centroid(centroids: &Array2<f64>, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = squared_distance(c.as_slice().expect("standard layout"), x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Result of one clustering run.
#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub model: ClusterModel,
    pub assignment: ClusterAssignment,
    /// Inertia per Lloyd iteration (k-means, spectral embedding k-means) or
    /// mean log-likelihood per EM iteration (Gaussian mixture).
    pub trace: Vec<f64>,
}

/// Algorithm selection plus the knobs each algorithm reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub kind: ClusterKind,
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub linkage: Linkage,
    /// Spectral kernel width; `None` derives it from the median distance.
    pub gamma: Option<f64>,
}

impl ClusterConfig {
    pub fn new(kind: ClusterKind, k: usize, seed: u64) -> Self {
        let (max_iter, tol) = match kind {
            ClusterKind::GaussianMixture => (300, 1e-6),
            _ => (300, 1e-8),
        };
        Self {
            kind,
            k,
            seed,
            max_iter,
            tol,
            linkage: Linkage::Ward,
            gamma: None,
        }
    }
}

pub fn fit(data: &Array2<f64>, config: &ClusterConfig) -> Result<ClusterFit> {
    let data = data.as_standard_layout().into_owned();
    match config.kind {
        ClusterKind::KMeans => kmeans(&data, config.k, config.seed, config.max_iter, config.tol),
        ClusterKind::GaussianMixture => {
            gaussian_mixture(&data, config.k, config.seed, config.max_iter, config.tol)
        }
        ClusterKind::Agglomerative => agglomerative(&data, config.k, config.linkage),
        ClusterKind::Spectral => spectral(&data, config.k, config.seed, config.gamma),
    }
}

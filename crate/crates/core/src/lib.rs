//! Hybrid regression: cluster a tabular dataset, score the clustering, and
//! fit one small neural network per cluster.
//!
//! The pipeline is
//! [`dataset`] (ingest, scale, split) → [`clustering`] (k-means, Gaussian
//! mixture, agglomerative, spectral) → [`quality`] (silhouette,
//! Calinski-Harabasz, Davies-Bouldin) → [`mlp`] (grid-searched local models)
//! → [`hybrid`] (routing, prediction, error reports). [`lda`] gives a 2-D
//! view of a clustering.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod hybrid;
pub mod lda;
pub mod linalg;
pub mod mlp;
pub mod quality;

pub use clustering::{ClusterAssignment, ClusterConfig, ClusterKind, ClusterModel, Linkage};
pub use dataset::{Dataset, ScalerParams, SplitSpec, TargetScaler};
pub use error::{Error, ErrorClass, Result};
pub use hybrid::{
    error_report, train_hybrid, ErrorReport, HybridConfig, HybridMode, HybridModel, MetricRow,
};
pub use lda::LdaProjection;
pub use mlp::{Activation, GridSpec, MlpModel, Solver};
pub use quality::{QualityReport, ScanReport};

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data, files or arguments.
    Data,
    /// A numerical procedure failed on otherwise valid input.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("cannot parse value {value:?} at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cluster {cluster} has {size} samples, fewer than the {required} required")]
    ClusterTooSmall {
        cluster: usize,
        size: usize,
        required: usize,
    },

    #[error("clustering produced {found} non-empty clusters instead of {expected}")]
    EmptyCluster { expected: usize, found: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("every grid candidate diverged")]
    AllCandidatesDiverged,

    #[error("training diverged: {0}")]
    Diverged(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::MissingColumn { .. }
            | Error::Parse { .. }
            | Error::EmptyDataset
            | Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::ClusterTooSmall { .. } => ErrorClass::Data,
            Error::EmptyCluster { .. }
            | Error::Degenerate(_)
            | Error::Eigen(_)
            | Error::NotPositiveDefinite(_)
            | Error::AllCandidatesDiverged
            | Error::Diverged(_) => ErrorClass::Numeric,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

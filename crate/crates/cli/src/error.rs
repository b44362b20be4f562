use std::path::{Path, PathBuf};

use hybreg::ErrorClass;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numeric(String),

    #[error("cannot write to {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 1 usage, 2 data or filesystem, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Output { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub(crate) fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<hybreg::Error> for CliError {
    fn from(e: hybreg::Error) -> Self {
        match e.class() {
            ErrorClass::Data => CliError::Data(e.to_string()),
            ErrorClass::Numeric => CliError::Numeric(e.to_string()),
        }
    }
}

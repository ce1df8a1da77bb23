use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] ibpg::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    /// Bad configuration or arguments; the CLI exits with status 1.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl BenchError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    pub fn is_usage(&self) -> bool {
        matches!(self, BenchError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

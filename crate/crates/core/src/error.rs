use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid sample set: {0}")]
    InvalidSamples(String),

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),

    #[error("metric error: {0}")]
    Metric(String),

    /// A binary file failed validation while decoding.
    #[error("format error in {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("config error (line {line}): {reason}")]
    Config { line: usize, reason: String },

    #[error("{0}")]
    Pipeline(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

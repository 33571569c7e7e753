use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, files or parameters.
    Data,
    /// A numerical procedure broke down (non-PSD covariance, degenerate model, ...).
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("malformed content at line {line} of {path}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("waveform contains no samples")]
    EmptyWaveform,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("event {index} does not fit: {reason}")]
    InvalidEvent { index: usize, reason: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("degenerate filterbank: {0}")]
    DegenerateFilterbank(String),
    #[error("negative value {value} at {location}")]
    NegativeValue { value: f64, location: String },
    #[error("shape underflow: {0}")]
    ShapeUnderflow(String),
    #[error("not enough data: {0}")]
    NotEnoughData(String),
    #[error("covariance of component {component} is not positive definite")]
    NotPositiveDefinite { component: usize },
    #[error("degenerate mixture: {0}")]
    DegenerateModel(String),
    #[error("all {n_trials} search trials failed: {causes:?}")]
    AllTrialsFailed {
        n_trials: usize,
        causes: Vec<(usize, String)>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotPositiveDefinite { .. } | Error::DegenerateModel(_) => ErrorKind::Numeric,
            Error::AllTrialsFailed { causes, .. } => {
                // numeric only when every trial broke down numerically
                if !causes.is_empty() && causes.iter().all(|(_, c)| c.starts_with("numeric:")) {
                    ErrorKind::Numeric
                } else {
                    ErrorKind::Data
                }
            }
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: `{field}` {reason}")]
    InvalidScenario { field: &'static str, reason: String },
    #[error("IMU window has {found} samples, expected {expected}")]
    WindowLength { expected: usize, found: usize },
    #[error("IMU window contains a non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidScenario { field, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

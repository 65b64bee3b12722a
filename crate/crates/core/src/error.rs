use std::path::PathBuf;

/// Errors produced anywhere in the simulation chain.
#[derive(Debug, thiserror::Error)]
pub enum OtfsError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl OtfsError {
    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        OtfsError::Dimension {
            what,
            expected,
            got,
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            OtfsError::Config(_) | OtfsError::Json { .. } | OtfsError::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, OtfsError>;

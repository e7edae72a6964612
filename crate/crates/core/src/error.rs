use std::path::PathBuf;

/// Errors produced by the detection and simulation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("search space of {candidates} candidates exceeds the enumeration cap of {cap}")]
    SearchTooLarge { candidates: u128, cap: u128 },

    #[error("linear algebra: {0}")]
    LinearAlgebra(String),

    #[error("degenerate network output: {0}")]
    DegenerateOutput(String),

    #[error("training diverged at batch {batch}: loss is not finite")]
    Diverged { batch: usize },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

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

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use crate::numcore::{ConfigError, ShapeError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite values after stage `{stage}`")]
    NonFinite { stage: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error at row {row}, column {column}: {detail}")]
    Parse { row: usize, column: usize, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(ConfigError(msg.into()))
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Numerical failures (NaN/inf) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }

    pub fn is_data(&self) -> bool {
        matches!(self, Error::Data(_) | Error::Parse { .. } | Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

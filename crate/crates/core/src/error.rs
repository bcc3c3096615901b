use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("crop rectangle out of bounds: {0}")]
    Bounds(String),

    #[error("invalid parameter `{field}`: {reason}")]
    Param { field: String, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch at {layer}: {reason}")]
    Shape { layer: String, reason: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Numerical { epoch: usize, batch: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("failed on {path}: {source}")]
    Item {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("audit failed: {0}")]
    Audit(String),

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Param { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn shape(layer: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Shape { layer: layer.into(), reason: reason.into() }
    }

    /// True for errors caused by bad configuration rather than by data or the runtime.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Param { .. } | Error::Json { .. })
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: expected input width {expected}, got {got}")]
    LayerDimension {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("network needs at least one layer")]
    EmptyNetwork,

    #[error("non-finite gradient in parameter tensor {tensor}")]
    NonFiniteGradient { tensor: usize },

    #[error("design matrix is rank deficient (pivot {pivot} of {dim}); refit with ridge regularization")]
    RankDeficient { pivot: usize, dim: usize },

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: no column named `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported model file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

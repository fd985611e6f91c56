use std::path::PathBuf;

use thiserror::Error;

use crate::domain::LayerFamily;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layer config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("catalog: {0}")]
    Catalog(String),

    #[error("unknown gpu `{0}` (not in catalog)")]
    UnknownGpu(String),

    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),

    #[error("non-positive gflops: {0}")]
    NonPositiveGflops(f64),

    #[error("csv: {0}")]
    Csv(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset too small: {0} records (need at least {1})")]
    TooSmall(usize, usize),

    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    Empty,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("schema mismatch at position {position}: expected `{expected}`, got `{found}`")]
    SchemaMismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("no model for layer family {0}")]
    MissingFamily(LayerFamily),

    #[error("registry: {0}")]
    Registry(String),

    #[error("architecture: {0}")]
    Architecture(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("no rows")]
    NoRows,
    #[error("observation does not match schema: {0}")]
    SchemaMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("training failed: {0}")]
    Training(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("no consistent rule exists: rows {twins:?} match every relevant predicate but receive the opposite prediction")]
    Infeasible { twins: Vec<usize> },
    #[error("solver time limit reached before a consistent rule was found")]
    Timeout,
    #[error("the observation is an outlier: there is no rule characterizing it")]
    Outlier,
    #[error("rule cache does not match the current model and data (cache {found}, expected {expected})")]
    CacheMismatch { found: String, expected: String },
    #[error("rule cache is corrupt: {0}")]
    CacheCorrupt(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

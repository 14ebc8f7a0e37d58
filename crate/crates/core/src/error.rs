use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} would need {size} nodes, above the cap of {cap}")]
    Resource { what: String, size: usize, cap: usize },

    #[error("{what} did not converge (best residual {residual:e})")]
    Solver { what: String, residual: f64 },

    /// A nonzero vector vanishes on the sample set and is invisible to the
    /// constrained functional, so the minimizer is not unique.
    #[error("non-unique solution: a nonzero kernel vector vanishes on the sample set")]
    NonUnique { witness: Vec<f64> },

    #[error("symmetry check failed: entry ({i},{j}) = {upper:e} but ({j},{i}) = {lower:e}")]
    Asymmetric { i: usize, j: usize, upper: f64, lower: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix market parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

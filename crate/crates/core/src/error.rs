use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed table: {0}")]
    Malformed(String),

    #[error("negative count {value} at row {row}, column {col}")]
    NegativeCount { row: usize, col: usize, value: String },

    #[error("non-integer count {value:?} at row {row}, column {col}")]
    NonIntegerCount { row: usize, col: usize, value: String },

    #[error("duplicate identifier {0:?}")]
    DuplicateId(String),

    #[error("need at least 2 taxa, found {0}")]
    TooFewTaxa(usize),

    #[error("no samples left after filtering")]
    AllSamplesRemoved,

    #[error("sample {0} has zero total count")]
    ZeroDepth(usize),

    #[error("non-positive entry {value} at row {row}, column {col}")]
    NonPositive { row: usize, col: usize, value: f64 },

    #[error("column {0} is constant")]
    ConstantColumn(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("condition number {requested} is not reachable; achievable range is ({low}, {high})")]
    ConditionUnreachable { requested: f64, low: f64, high: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::NotPositiveDefinite
            | Error::ConditionUnreachable { .. }
            | Error::NonConvergence { .. }
            | Error::NonFinite(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

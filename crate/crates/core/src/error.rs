use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate cell {cell}: signed area {area:e}")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("singular affine map (det = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    /// A cell velocity block could not be factorized. For a valid mesh this
    /// means the penalty parameter is below the stability threshold.
    #[error("cell velocity block of cell {cell} is not positive definite (alpha_v = {alpha})")]
    SingularCellBlock { cell: usize, alpha: f64 },

    #[error("sparse factorization of the {block} block failed: {msg}")]
    Factorization { block: &'static str, msg: String },

    #[error("preconditioner is not positive definite (r.z = {0:e})")]
    IndefinitePreconditioner(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dense oracle refused: dimension {n} exceeds cap {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

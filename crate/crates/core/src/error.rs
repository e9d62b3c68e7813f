use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("state is not faithful (rank {rank} < {dim})")]
    NonFaithful { rank: usize, dim: usize },

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("function undefined at retained eigenvalue {0:e}")]
    FunctionUndefined(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("map is not completely positive (min Choi eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),

    #[error("span is not a *-algebra (closure residual {0:.3e})")]
    NotAnAlgebra(f64),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("empty family")]
    EmptyFamily,

    #[error("numerical inconsistency: {0}")]
    Inconsistency(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

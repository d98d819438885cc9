use thiserror::Error;

/// Errors produced by tensor construction, graph ops and gradient checking.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch in {op}: lhs shape {lhs:?}, rhs shape {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid axis {axis} for a tensor of rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parameter {0:?} registered twice")]
    DuplicateParameter(String),

    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

use thiserror::Error;

/// Errors produced by the transport library.
#[derive(Debug, Error)]
pub enum QotError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("generator is not ergodic (kernel dimension {0})")]
    NonErgodic(usize),

    #[error("inconsistent right-hand side: normalized trace {0:.3e} is not zero")]
    InconsistentRhs(f64),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QotError>;

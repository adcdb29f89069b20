//! Error type shared by every module.

/// Everything that can go wrong outside of programmer error.
///
/// Numerical *diagnostics* (residuals, condition numbers) are not errors; they
/// are returned in report types. `Error` is reserved for inputs that violate a
/// documented precondition and for internal verification failures that must
/// not be silently accepted.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("empty operand list")]
    EmptyList,
    #[error("{0} is singular or too ill-conditioned")]
    Singular(&'static str),
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("kernel is not normalized at the origin")]
    NotNormalized,
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("empty validity box at the requested order")]
    EmptyValidityBox,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("internal verification failed: {0}")]
    VerificationFailed(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("intertwiner space has dimension {0} between irreducible families; expected 0 or 1")]
    IrreducibleInconsistency(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

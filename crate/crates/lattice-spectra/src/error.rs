//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while building or analysing an operator.
#[derive(Debug, Error)]
pub enum Error {
    /// A model definition violates a structural requirement (hermiticity,
    /// realness of a potential, a minimum away from the expected point, ...).
    #[error("invalid model: {0}")]
    ModelValidation(String),

    /// A plain bad argument: odd grid size, empty schedule, out-of-range
    /// index and so on.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested spectral parameter makes the operator singular on the
    /// grid (for instance lambda not strictly below the dispersion minimum).
    #[error("spectral parameter out of range: {0}")]
    SpectralParameter(String),

    /// A numerical routine failed (LAPACK nonzero info, lost convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A precondition of the underlying theory does not hold for the given
    /// model, so the requested quantity is not meaningful.
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    /// A function evaluation produced a NaN or infinity.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Two independently computed quantities that must agree do not.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

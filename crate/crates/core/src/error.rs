//! Shared error type for the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Floating-point precision was insufficient to certify the result
    /// (e.g. a continued-fraction remainder collapsed to zero, or a gap
    /// enumeration produced more distinct lengths than theory allows).
    #[error("precision failure: {0}")]
    Precision(String),

    /// Integer capacity exceeded (convergent denominators past i128 range).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A declared structural property failed to validate on concrete data.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Green-function query at an energy too close to a box eigenvalue.
    #[error("energy within {distance:.3e} of a box eigenvalue; Green function ill-conditioned")]
    NearEigenvalue { distance: f64 },

    /// An iterative numerical procedure did not converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn precision(msg: impl Into<String>) -> Self {
        Error::Precision(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

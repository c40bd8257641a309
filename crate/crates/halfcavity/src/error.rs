use thiserror::Error;

/// Errors produced by the halfcavity library.
#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter, mesh option or scan range failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A qubit state or amplitude violates its physical invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A series term could not be evaluated to a finite value.
    #[error("series overflow: {0}")]
    Overflow(String),

    /// A measure computation hit its horizon budget before the tail
    /// contribution could be certified.
    #[error("not converged: {0}")]
    NotConverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

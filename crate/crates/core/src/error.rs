//! Crate-wide error type.
//!
//! `Hypothesis` is the variant every admissibility gate raises: the message
//! names the mathematical condition that failed (e.g. the anti-Turing bound
//! `sigma <= 1`), so callers can surface it verbatim.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// A named admissibility hypothesis is violated.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A sampled or computed value is NaN/infinite where finiteness is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Adaptive quadrature failed to reach its tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// An iterative solver hit its iteration cap.
    #[error("iteration limit in {what}: last residual {residual:.3e}")]
    IterationLimit { what: String, residual: f64 },

    /// Least-squares decay fit could not be performed.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Malformed field file.
    #[error("field format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }
}

//! Shared error type for all solver modules.

use thiserror::Error;

/// Errors surfaced by parameter validation, the root finder, and the solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An input violates a documented domain restriction.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketing root finder was handed an interval without a sign change.
    #[error("no bracket: f({lo}) = {f_lo}, f({hi}) = {f_hi} have the same sign")]
    NoBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// An iterative method ran out of its iteration budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// The finite-horizon solver refused because the gain-kernel monotonicity
    /// condition it relies on could not be certified.
    #[error("validity error: {0}")]
    Validity(String),

    /// The backward sweep produced a boundary that increases in time beyond
    /// tolerance, which contradicts the structure of the problem.
    #[error("monotonicity error: {0}")]
    Monotonicity(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { what: &'static str, asymmetry: f64 },

    #[error("{what} is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { what: &'static str, eigenvalue: f64 },

    #[error("{what} is singular (eigenvalue {eigenvalue:e})")]
    Singular { what: &'static str, eigenvalue: f64 },

    #[error("degenerate encounter: relative velocity is zero")]
    DegenerateEncounter,

    #[error("numerical failure: integrand not finite at psi = {psi}")]
    NumericalFailure { psi: f64 },

    #[error("no convergence after {iterations} iterations (bounds [{lower:e}, {upper:e}])")]
    NoConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("unsupported proposition: {0}")]
    Unsupported(&'static str),

    #[error("proposition {index} contains the true parameter")]
    TrueProposition { index: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}

//! Crate wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad mesh parameters, empty boundary marker,
    /// missing problem data, mismatched spaces.
    #[error("configuration error: {0}")]
    Config(String),

    /// Geometry the discretization does not support, e.g. a tangential
    /// velocity constraint on a boundary edge that is not axis aligned.
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// A factorization hit a negligible pivot; the system is singular or
    /// numerically indefinite beyond the expected saddle point structure.
    #[error("singular system: pivot {pivot:.3e} at elimination step {step} of {n}")]
    Singular { step: usize, n: usize, pivot: f64 },

    /// A solve finished but the residual check failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Problem size exceeds a dense-eigensolve cap.
    #[error("size cap exceeded: {what} has {got} dofs, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A covariance matrix violates the uncertainty principle or is not positive definite.
    #[error("non-physical state: {0}")]
    NonPhysical(String),

    /// Adaptive quadrature exhausted its refinement budget.
    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Convergence { estimate: f64, tolerance: f64 },

    /// A time lies outside a tabulated grid.
    #[error("time {t} outside tabulated range [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },

    /// The requested analytic formula does not apply to the given input.
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// Internal numerical invariant violated.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

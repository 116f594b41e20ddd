//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
///
/// Numerical routines report *why* they failed so that callers (and the CLI)
/// can distinguish user mistakes from conditioning problems.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter value violates the domain of the covariance family.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A data argument (times, values, grids) is malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A Gram matrix could not be factorized even after adding diagonal
    /// jitter. The attempted jitter magnitudes are reported in order.
    #[error("matrix factorization failed after jitter levels {jitters:?}; the covariance matrix is numerically singular")]
    Conditioning {
        /// Jitter values (absolute, same units as the diagonal) that were
        /// tried before giving up.
        jitters: Vec<f64>,
    },

    /// The linear system is not asymptotically stable, so no stationary
    /// state exists.
    #[error("invalid system: {0}")]
    UnstableSystem(String),

    /// The system is stable but its stationary output carries no usable
    /// variance in the observed component.
    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    /// A configuration value (step sizes, budgets, prior ranges) is out of
    /// its documented domain.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough observations for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Every optimizer restart failed to produce a usable optimum.
    #[error("fit failure: none of the {restarts} restarts converged to a finite optimum")]
    FitFailure {
        /// Number of restarts attempted.
        restarts: usize,
        /// Per-restart objective traces as (iteration, log marginal
        /// likelihood) pairs, for diagnosis.
        traces: Vec<Vec<(usize, f64)>>,
    },

    /// A Monte Carlo or quadrature computation produced no finite mass.
    #[error("numerical failure: {0}; consider reviewing the prior ranges")]
    NumericalFailure(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

//! Stationary Gaussian processes from two-dimensional linear stochastic
//! systems.
//!
//! A two-dimensional Ornstein-Uhlenbeck system whose first component is
//! observed induces a four-parameter family of stationary covariance
//! functions spanning damped oscillations, critically damped decay, and
//! mixtures of exponentials. This crate provides:
//!
//! * [`kernel`]: the covariance family, its two parametrizations, and
//!   analytic gradients;
//! * [`sde`]: the underlying state-space view (stability, matrix
//!   exponentials, stationary covariance, simulation);
//! * [`gp`]: Gaussian-process machinery (Gram matrices, marginal likelihood
//!   with gradients, sampling, prediction, fitting);
//! * [`inference`]: Bayesian model comparison between the oscillatory and
//!   non-oscillatory halves of the family.

pub mod error;
pub mod gp;
pub mod inference;
pub mod kernel;
pub mod sde;
mod series;

pub use error::{Error, Result};
pub use gp::{FitConfig, FitResult, GPModel, LmlGradient, TimeSeries};
pub use inference::{Classification, JPrior, Label, OddsResult, PriorSpec, ScalarPrior};
pub use kernel::{HyperParams, NaturalParams};
pub use sde::{AutocovPoint, SimConfig, StabilityReport, StatePath, SystemSpec};

//! A four-parameter family of stationary covariance functions.
//!
//! The family is
//!
//! ```text
//! C(tau) = e^{2k} e^{-sigma |tau|} ( cosh(sqrt(Delta) tau)
//!        + j sigma sinh(sqrt(Delta) |tau|) / sqrt(Delta) )
//! ```
//!
//! with `sigma = e^h`, `Delta = sigma^2 (1 - e^s)` and `j = sin(pi p / 2)`.
//! It interpolates continuously between damped oscillations (`s > 0`, where
//! `sqrt(Delta)` is imaginary and the cosh/sinh pair becomes cos/sin), a
//! critically damped point (`s = 0`), and mixtures of two real exponentials
//! (`s < 0`), including the plain Ornstein-Uhlenbeck covariance as the edge
//! case `j = sqrt(1 - e^s)`.
//!
//! `h`, `s`, `k`, `p` are unconstrained reals, which makes the family
//! convenient for gradient-based maximum likelihood. The equivalent
//! constrained description `(sigma, Delta, S11, J)` is available through
//! [`NaturalParams`].

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::series::damped_terms;

/// Unconstrained hyperparameters of the covariance family.
///
/// All four coordinates range over the whole real line. `p` is periodic:
/// `p` and `2 - p` describe the same function, so fitted values are reported
/// on the principal branch `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Log damping rate: `sigma = e^h`.
    pub h: f64,
    /// Log ratio shaping the discriminant: `Delta = sigma^2 (1 - e^s)`.
    /// Positive `s` gives oscillation, negative `s` overdamping.
    pub s: f64,
    /// Half log marginal variance: `C(0) = e^{2k}`.
    pub k: f64,
    /// Asymmetry angle: `j = sin(pi p / 2)` weights the sinh term.
    pub p: f64,
}

/// Constrained "natural" parameters `(sigma, delta, s11, j)`.
///
/// `sigma` is the damping rate, `delta` the discriminant, `s11` the marginal
/// variance `C(0)`, and `j` the signed asymmetry amplitude (the coefficient
/// usually written `J`), bounded by `|j| <= s11`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalParams {
    pub sigma: f64,
    pub delta: f64,
    pub s11: f64,
    pub j: f64,
}

impl NaturalParams {
    /// Validating constructor.
    pub fn new(sigma: f64, delta: f64, s11: f64, j: f64) -> Result<Self> {
        let np = NaturalParams { sigma, delta, s11, j };
        np.validate()?;
        Ok(np)
    }

    /// Checks the domain constraints, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let NaturalParams { sigma, delta, s11, j } = *self;
        if !(sigma.is_finite() && delta.is_finite() && s11.is_finite() && j.is_finite()) {
            return Err(Error::InvalidParameter(
                "natural parameters must be finite".into(),
            ));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "damping rate sigma must be positive, got {sigma}"
            )));
        }
        if delta >= sigma * sigma {
            return Err(Error::InvalidParameter(format!(
                "discriminant delta = {delta} must be below sigma^2 = {}",
                sigma * sigma
            )));
        }
        if s11 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "marginal variance s11 must be positive, got {s11}"
            )));
        }
        if j.abs() > s11 {
            return Err(Error::InvalidParameter(format!(
                "asymmetry |j| = {} exceeds the marginal variance s11 = {s11}",
                j.abs()
            )));
        }
        Ok(())
    }

    /// The normalized asymmetry `j / s11`, always in `[-1, 1]`.
    pub fn asymmetry_ratio(&self) -> f64 {
        self.j / self.s11
    }
}

/// Intermediate quantities shared by `eval` and `eval_grad`.
struct Terms {
    sigma: f64,
    r: f64,
    s11: f64,
    j: f64,
    /// `e^s`, kept for the `s`-derivative.
    es: f64,
    /// `delta * r^2`.
    y: f64,
    eg1: f64,
    eg2: f64,
    eg3: f64,
}

impl HyperParams {
    /// Validating constructor; all finite values are admissible.
    pub fn new(h: f64, s: f64, k: f64, p: f64) -> Result<Self> {
        let theta = HyperParams { h, s, k, p };
        theta.check_finite()?;
        Ok(theta)
    }

    fn check_finite(&self) -> Result<()> {
        if !(self.h.is_finite() && self.s.is_finite() && self.k.is_finite() && self.p.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "hyperparameters must be finite, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Damping rate `sigma = e^h`.
    pub fn sigma(&self) -> f64 {
        self.h.exp()
    }

    /// Normalized asymmetry `j = sin(pi p / 2)`.
    pub fn asymmetry(&self) -> f64 {
        (FRAC_PI_2 * self.p).sin()
    }

    /// Maps to the constrained parametrization.
    pub fn to_natural(&self) -> Result<NaturalParams> {
        self.check_finite()?;
        let sigma = self.h.exp();
        let s11 = (2.0 * self.k).exp();
        // delta = sigma^2 (1 - e^s), via expm1 so that s near 0 keeps full
        // precision in the critical region.
        let delta = -sigma * sigma * self.s.exp_m1();
        let j = s11 * self.asymmetry();
        Ok(NaturalParams { sigma, delta, s11, j })
    }

    /// Inverse of [`to_natural`], reporting `p` on the principal branch
    /// `[-1, 1]`.
    ///
    /// [`to_natural`]: HyperParams::to_natural
    pub fn from_natural(np: &NaturalParams) -> Result<Self> {
        np.validate()?;
        let h = np.sigma.ln();
        // s = ln(1 - delta / sigma^2); ln_1p keeps precision when delta is
        // tiny relative to sigma^2.
        let s = (-np.delta / (np.sigma * np.sigma)).ln_1p();
        let k = 0.5 * np.s11.ln();
        let p = (2.0 / PI) * np.asymmetry_ratio().clamp(-1.0, 1.0).asin();
        Ok(HyperParams { h, s, k, p })
    }

    fn terms(&self, tau: f64) -> Terms {
        let sigma = self.h.exp();
        let r = tau.abs();
        let s11 = (2.0 * self.k).exp();
        let j = self.asymmetry();
        let em1 = self.s.exp_m1();
        let sr = sigma * r;
        let y = -em1 * sr * sr;
        // Slow-mode exponent (sigma - sqrt(delta)) r, rewritten so the
        // near-cancellation at small e^s never happens explicitly:
        // sigma - sqrt(delta) = sigma e^s / (1 + sqrt(1 - e^s)).
        let slow = if em1 < 0.0 {
            let w = (-em1).sqrt();
            sr * (1.0 + em1) / (1.0 + w)
        } else {
            sr
        };
        let (eg1, eg2, eg3) = damped_terms(sr, y, slow);
        Terms { sigma, r, s11, j, es: 1.0 + em1, y, eg1, eg2, eg3 }
    }

    /// Evaluates the covariance at lag `tau`.
    ///
    /// The result is finite for every finite `tau`; the oscillatory,
    /// critical, and overdamped regimes share one continuous implementation.
    pub fn eval(&self, tau: f64) -> f64 {
        let t = self.terms(tau);
        t.s11 * (t.eg1 + t.j * t.sigma * t.r * t.eg2)
    }

    /// Evaluates the covariance and its gradient over `(h, s, k, p)`.
    pub fn eval_grad(&self, tau: f64) -> (f64, [f64; 4]) {
        let Terms { sigma, r, s11, j, es, y, eg1, eg2, eg3 } = self.terms(tau);
        let sr = sigma * r;
        let c = s11 * (eg1 + j * sr * eg2);
        // d/dh: the damping and the sinh prefactor both carry sigma; the
        // cosh/sinh derivatives recombine into the same three terms.
        let dh = -sr * c + s11 * (y * eg2 + j * sr * eg1);
        // d/ds through delta only: d(delta)/ds = -sigma^2 e^s, and
        // d C / d delta = s11 (r^2 eg2 + j sigma r^3 eg3) / 2.
        let ds = -0.5 * sigma * sigma * es * s11 * (r * r * eg2 + j * sigma * r * r * r * eg3);
        let dk = 2.0 * c;
        let dp = FRAC_PI_2 * (FRAC_PI_2 * self.p).cos() * s11 * sr * eg2;
        (c, [dh, ds, dk, dp])
    }

    /// One-sided derivative `C'(0+) = e^{2k} sigma (j - 1)`.
    ///
    /// Vanishes exactly at `p = 1`, the only member of the family that is
    /// differentiable at the origin.
    pub fn right_derivative_at_zero(&self) -> f64 {
        (2.0 * self.k).exp() * self.sigma() * (self.asymmetry() - 1.0)
    }

    /// Quality factor `Q = e^{s/2} / 2` of the underlying resonance.
    ///
    /// `Q > 1/2` means oscillatory, `Q < 1/2` overdamped.
    pub fn q_factor(&self) -> f64 {
        0.5 * (0.5 * self.s).exp()
    }
}

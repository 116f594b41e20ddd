//! Bayesian detection of oscillatory dynamics.
//!
//! The covariance family oscillates exactly when s > 0, so "does the signal
//! ring?" becomes a posterior probability. With a prior over the kernel
//! parameters, the odds are a ratio of two integrals,
//!
//! ```text
//! odds = P(D | s > 0) P(s > 0)   integral of P(D|theta) over s > 0
//!        ------------------------ = ---------------------------------,
//!        P(D | s < 0) P(s < 0)   integral of P(D|theta) over s < 0
//! ```
//!
//! estimated by Monte Carlo over prior draws restricted to each side, with
//! all accumulation in the log domain. A deterministic tensor-grid
//! quadrature is available as a cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::gp::{self, GPModel, TimeSeries};
use crate::kernel::HyperParams;

/// Prior over the asymmetry parameter j.
///
/// `Tilted` has density (1 + j)/2 on [-1, 1]: it keeps a positive limit at
/// j = +1 and vanishes linearly at j = -1, reflecting that j = +1 arises
/// from a codimension-1 family of systems while j = -1 needs codimension 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JPrior {
    Uniform,
    Tilted,
}

/// Prior over a scalar nuisance parameter (mean or noise variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarPrior {
    Fixed(f64),
    Uniform(f64, f64),
}

impl ScalarPrior {
    fn validate(&self, name: &str, nonnegative: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            ScalarPrior::Fixed(v) => {
                if !v.is_finite() {
                    return bad(format!("{name} prior value must be finite, got {v}"));
                }
                if nonnegative && v < 0.0 {
                    return bad(format!("{name} prior value must be nonnegative, got {v}"));
                }
            }
            ScalarPrior::Uniform(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("{name} prior range must be a finite nonempty interval, got [{lo}, {hi}]"));
                }
                if nonnegative && lo < 0.0 {
                    return bad(format!("{name} prior range must be nonnegative, got [{lo}, {hi}]"));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            ScalarPrior::Fixed(v) => v,
            ScalarPrior::Uniform(lo, hi) => rng.random_range(lo..hi),
        }
    }

    fn is_fixed(&self) -> bool {
        matches!(self, ScalarPrior::Fixed(_))
    }
}

/// Priors over the model parameters.
///
/// h, s, k carry independent uniform priors on finite ranges; j carries
/// either the uniform or the tilted prior on [-1, 1]; mean and noise
/// variance are fixed or uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub h_range: (f64, f64),
    pub s_range: (f64, f64),
    pub k_range: (f64, f64),
    pub j_prior: JPrior,
    pub mean_prior: ScalarPrior,
    pub noise_prior: ScalarPrior,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let interval = |name: &str, (lo, hi): (f64, f64)| -> Result<()> {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "{name} must be a finite nonempty interval, got [{lo}, {hi}]"
                )));
            }
            Ok(())
        };
        interval("h_range", self.h_range)?;
        interval("s_range", self.s_range)?;
        interval("k_range", self.k_range)?;
        if !(self.s_range.0 < 0.0 && self.s_range.1 > 0.0) {
            return Err(Error::Config(format!(
                "s_range must straddle 0 for the odds to be meaningful, got [{}, {}]",
                self.s_range.0, self.s_range.1
            )));
        }
        self.mean_prior.validate("mean", false)?;
        self.noise_prior.validate("noise", true)?;
        Ok(())
    }

    /// Data-adaptive default: h spans the resolvable rate window between the
    /// total span and twice the finest sampling rate, k centers on the log
    /// sample standard deviation, mean and noise stay fixed.
    pub fn default_for(data: &TimeSeries) -> Result<PriorSpec> {
        data.validate()?;
        if data.len() < 2 {
            return Err(Error::InsufficientData(
                "default prior ranges need at least 2 points".into(),
            ));
        }
        let span = data.times[data.len() - 1] - data.times[0];
        let dt_min = data
            .times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let mean = data.value_mean();
        let var = data.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / data.len() as f64;
        let log_sd = if var > 0.0 { 0.5 * var.ln() } else { 0.0 };
        let prior = PriorSpec {
            h_range: ((1.0 / span).ln(), (2.0 / dt_min).ln()),
            s_range: (-4.0, 4.0),
            k_range: (log_sd - 2.0, log_sd + 2.0),
            j_prior: JPrior::Uniform,
            mean_prior: ScalarPrior::Fixed(mean),
            noise_prior: ScalarPrior::Fixed(0.0),
        };
        prior.validate()?;
        Ok(prior)
    }

    /// One model draw with s restricted to (s_lo, s_hi).
    fn draw_restricted(&self, rng: &mut ChaCha12Rng, s_lo: f64, s_hi: f64) -> GPModel {
        let h = rng.random_range(self.h_range.0..self.h_range.1);
        let s = rng.random_range(s_lo..s_hi);
        let k = rng.random_range(self.k_range.0..self.k_range.1);
        let j = match self.j_prior {
            JPrior::Uniform => rng.random_range(-1.0..1.0),
            // Inverse CDF of (1+j)/2 on [-1, 1].
            JPrior::Tilted => 2.0 * rng.random_range(0.0..1.0f64).sqrt() - 1.0,
        };
        let p = (2.0 / PI) * j.asin();
        GPModel {
            theta: HyperParams { h, s, k, p },
            mean: self.mean_prior.draw(rng),
            noise_var: self.noise_prior.draw(rng),
        }
    }
}

/// Posterior odds that the dynamics oscillate (s > 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsResult {
    /// log of P(oscillatory | D) / P(overdamped | D).
    pub log_odds: f64,
    /// Monte-Carlo standard error of `log_odds` (0 for the grid quadrature).
    pub stderr: f64,
    pub n_samples: usize,
    /// P(oscillatory | D) = odds / (1 + odds).
    pub p_oscillatory: f64,
}

impl OddsResult {
    fn from_log_odds(log_odds: f64, stderr: f64, n_samples: usize) -> OddsResult {
        // Logistic in the log domain stays accurate for very large odds.
        let p_oscillatory = if log_odds >= 0.0 {
            1.0 / (1.0 + (-log_odds).exp())
        } else {
            let e = log_odds.exp();
            e / (1.0 + e)
        };
        OddsResult { log_odds, stderr, n_samples, p_oscillatory }
    }
}

/// Classification label for [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Oscillatory,
    Overdamped,
    Undecided,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Oscillatory => "oscillatory",
            Label::Overdamped => "overdamped",
            Label::Undecided => "undecided",
        };
        f.write_str(s)
    }
}

/// Odds plus the thresholded decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    pub odds: OddsResult,
}

/// Draws `count` models from the prior (s unrestricted), deterministically
/// in the seed.
pub fn prior_sample(prior: &PriorSpec, seed: u64, count: usize) -> Result<Vec<GPModel>> {
    prior.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| prior.draw_restricted(&mut rng, prior.s_range.0, prior.s_range.1))
        .collect())
}

/// Number of batch means per integral side.
const BATCHES: usize = 20;

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log likelihood of the data under one prior draw; impossible or
/// numerically failed draws contribute zero mass.
fn log_lik(model: &GPModel, data: &TimeSeries) -> f64 {
    match gp::log_marginal_likelihood_value(model, data) {
        Ok(v) if !v.is_nan() => v,
        _ => f64::NEG_INFINITY,
    }
}

/// One side of the odds ratio: batched restricted-region Monte Carlo.
///
/// Returns the log of the conditional likelihood average and the delta-method
/// standard error of that log. Batch b uses the RNG stream
/// `stream_base + b`, so results do not depend on evaluation order.
fn side_estimate(
    data: &TimeSeries,
    prior: &PriorSpec,
    s_lo: f64,
    s_hi: f64,
    per_batch: usize,
    seed: u64,
    stream_base: u64,
) -> (f64, f64) {
    let mut batch_logs = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_base + b as u64);
        let logs: Vec<f64> = (0..per_batch)
            .map(|_| log_lik(&prior.draw_restricted(&mut rng, s_lo, s_hi), data))
            .collect();
        batch_logs.push(log_sum_exp(&logs) - (per_batch as f64).ln());
    }
    let total = log_sum_exp(&batch_logs) - (BATCHES as f64).ln();
    if !total.is_finite() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    // Delta method: the batch means exp(l_b - total) average to 1, and the
    // standard error of log(mean) is the standard error of the mean itself.
    let ratios: Vec<f64> = batch_logs.iter().map(|l| (l - total).exp()).collect();
    let var = ratios.iter().map(|r| (r - 1.0) * (r - 1.0)).sum::<f64>() / (BATCHES - 1) as f64;
    (total, (var / BATCHES as f64).sqrt())
}

/// Monte-Carlo posterior odds of oscillation.
///
/// The budget is split evenly between the two sides of s = 0 and, within
/// each side, across [`BATCHES`] batches whose spread yields the standard
/// error. Draws restrict s to one side directly; the prior mass of each side
/// reweights the two averages.
pub fn posterior_odds(
    data: &TimeSeries,
    prior: &PriorSpec,
    budget: usize,
    seed: u64,
) -> Result<OddsResult> {
    data.validate()?;
    prior.validate()?;
    if budget < 1000 {
        return Err(Error::Config(format!(
            "budget must be at least 1000 samples, got {budget}"
        )));
    }
    let per_batch = budget / (2 * BATCHES);
    let (s_lo, s_hi) = prior.s_range;
    let mass_pos = s_hi / (s_hi - s_lo);
    let mass_neg = -s_lo / (s_hi - s_lo);

    let (log_pos, se_pos) = side_estimate(data, prior, 0.0, s_hi, per_batch, seed, 0);
    let (log_neg, se_neg) =
        side_estimate(data, prior, s_lo, 0.0, per_batch, seed, BATCHES as u64);
    if !log_pos.is_finite() || !log_neg.is_finite() {
        return Err(Error::NumericalFailure(
            "every sampled likelihood underflowed to zero".into(),
        ));
    }
    let log_odds = mass_pos.ln() + log_pos - mass_neg.ln() - log_neg;
    let stderr = (se_pos * se_pos + se_neg * se_neg).sqrt();
    Ok(OddsResult::from_log_odds(log_odds, stderr, 2 * BATCHES * per_batch))
}

/// Deterministic tensor-grid cross-check of [`posterior_odds`].
///
/// Midpoint quadrature with `resolution` nodes per axis over (h, s, k, j) on
/// each side of s = 0; requires fixed mean and noise priors. The reported
/// standard error is zero; the discretization error shrinks with resolution.
pub fn posterior_odds_grid(
    data: &TimeSeries,
    prior: &PriorSpec,
    resolution: usize,
) -> Result<OddsResult> {
    data.validate()?;
    prior.validate()?;
    if resolution < 2 {
        return Err(Error::Config(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    if !(prior.mean_prior.is_fixed() && prior.noise_prior.is_fixed()) {
        return Err(Error::Config(
            "grid quadrature supports only fixed mean and noise priors".into(),
        ));
    }
    let mean = match prior.mean_prior {
        ScalarPrior::Fixed(v) => v,
        ScalarPrior::Uniform(..) => unreachable!(),
    };
    let noise_var = match prior.noise_prior {
        ScalarPrior::Fixed(v) => v,
        ScalarPrior::Uniform(..) => unreachable!(),
    };

    let midpoints = |lo: f64, hi: f64| -> Vec<f64> {
        let step = (hi - lo) / resolution as f64;
        (0..resolution).map(|i| lo + (i as f64 + 0.5) * step).collect()
    };
    let side = |s_lo: f64, s_hi: f64| -> f64 {
        let hs = midpoints(prior.h_range.0, prior.h_range.1);
        let ss = midpoints(s_lo, s_hi);
        let ks = midpoints(prior.k_range.0, prior.k_range.1);
        let js = midpoints(-1.0, 1.0);
        let mut logs = Vec::with_capacity(resolution.pow(4));
        let mut log_weights = Vec::with_capacity(resolution.pow(4));
        for &h in &hs {
            for &s in &ss {
                for &k in &ks {
                    for &j in &js {
                        let w = match prior.j_prior {
                            JPrior::Uniform => 0.5,
                            JPrior::Tilted => (1.0 + j) / 2.0,
                        };
                        if w <= 0.0 {
                            continue;
                        }
                        let p = (2.0 / PI) * j.asin();
                        let model = GPModel {
                            theta: HyperParams { h, s, k, p },
                            mean,
                            noise_var,
                        };
                        logs.push(log_lik(&model, data) + w.ln());
                        log_weights.push(w.ln());
                    }
                }
            }
        }
        // Weighted average over the conditional prior; the uniform axes'
        // densities cancel between numerator and normalizer.
        log_sum_exp(&logs) - log_sum_exp(&log_weights)
    };

    let (s_lo, s_hi) = prior.s_range;
    let mass_pos = s_hi / (s_hi - s_lo);
    let mass_neg = -s_lo / (s_hi - s_lo);
    let log_pos = side(0.0, s_hi);
    let log_neg = side(s_lo, 0.0);
    if !log_pos.is_finite() || !log_neg.is_finite() {
        return Err(Error::NumericalFailure(
            "every grid-node likelihood underflowed to zero".into(),
        ));
    }
    let log_odds = mass_pos.ln() + log_pos - mass_neg.ln() - log_neg;
    Ok(OddsResult::from_log_odds(log_odds, 0.0, 2 * resolution.pow(4)))
}

/// Maps log odds to a label: decided only when the odds (either way)
/// exceed the threshold.
pub fn label_for(log_odds: f64, threshold_odds: f64) -> Label {
    let t = threshold_odds.ln();
    if log_odds > t {
        Label::Oscillatory
    } else if log_odds < -t {
        Label::Overdamped
    } else {
        Label::Undecided
    }
}

/// Thresholded decision over [`posterior_odds`].
pub fn classify(
    data: &TimeSeries,
    prior: &PriorSpec,
    threshold_odds: f64,
    budget: usize,
    seed: u64,
) -> Result<Classification> {
    if !(threshold_odds > 1.0) {
        return Err(Error::Config(format!(
            "threshold odds must exceed 1, got {threshold_odds}"
        )));
    }
    let odds = posterior_odds(data, prior, budget, seed)?;
    Ok(Classification { label: label_for(odds.log_odds, threshold_odds), odds })
}

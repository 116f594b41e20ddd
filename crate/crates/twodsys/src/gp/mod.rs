//! Gaussian-process machinery over the covariance family.
//!
//! A model is the kernel's hyperparameters plus a constant mean and an
//! optional observation-noise variance. The log marginal likelihood of data
//! observed at arbitrary times is
//!
//! ```text
//! log P(D | model) = -1/2 r^T c^{-1} r - 1/2 log det c - n/2 log 2 pi,
//! c = gram + noise_var I,  r = values - mean,
//! ```
//!
//! with analytic gradients over all six parameters. Uniform grids are
//! detected and routed through an O(n^2) Toeplitz path; everything else uses
//! dense Cholesky.

mod optimize;
mod solve;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::HyperParams;
use optimize::{minimize, OptSettings};
use solve::{dense_cholesky, dense_logdet, toeplitz_factor, uniform_step};

/// Observations of one scalar signal at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let ts = TimeSeries { times, values };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "times and values lengths differ: {} vs {}",
                self.times.len(),
                self.values.len()
            )));
        }
        if self.times.is_empty() {
            return Err(Error::InvalidInput("need at least one observation".into()));
        }
        if !self.times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidInput("times must be finite".into()));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Arithmetic mean of the observed values.
    pub fn value_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A complete generative model: kernel, constant mean, observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPModel {
    pub theta: HyperParams,
    pub mean: f64,
    /// Observation-noise variance added to the Gram diagonal; zero recovers
    /// the noiseless process.
    pub noise_var: f64,
}

impl GPModel {
    pub fn new(theta: HyperParams, mean: f64, noise_var: f64) -> Result<Self> {
        let model = GPModel { theta, mean, noise_var };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        HyperParams::new(self.theta.h, self.theta.s, self.theta.k, self.theta.p)?;
        if !self.mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mean must be finite, got {}",
                self.mean
            )));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be finite and nonnegative, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }
}

/// Gradient of the log marginal likelihood over all model parameters.
///
/// The `noise_var` component is with respect to the variance itself, not its
/// logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmlGradient {
    pub h: f64,
    pub s: f64,
    pub k: f64,
    pub p: f64,
    pub mean: f64,
    pub noise_var: f64,
}

impl LmlGradient {
    pub fn as_array(&self) -> [f64; 6] {
        [self.h, self.s, self.k, self.p, self.mean, self.noise_var]
    }
}

/// Optimizer settings for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Fit the constant mean (otherwise fixed to the data mean).
    pub fit_mean: bool,
    /// Fit the observation-noise variance through its logarithm (otherwise
    /// fixed to `fixed_noise_var`).
    pub fit_noise: bool,
    /// Noise variance used when `fit_noise` is false.
    pub fixed_noise_var: f64,
    pub max_iter: usize,
    /// Relative infinity-norm gradient tolerance.
    pub grad_tol: f64,
    /// Relative objective-change tolerance.
    pub f_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            fit_mean: true,
            fit_noise: true,
            fixed_noise_var: 0.0,
            max_iter: 200,
            grad_tol: 1e-6,
            f_tol: 1e-11,
        }
    }
}

/// Outcome of maximum-likelihood fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: GPModel,
    pub log_marginal_likelihood: f64,
    pub converged: bool,
    pub n_restarts_used: usize,
    /// (iteration, log marginal likelihood) of the winning restart.
    pub optimizer_trace: Vec<(usize, f64)>,
}

/// Covariance matrix between two sets of times (symmetric when `times_b` is
/// absent).
pub fn gram(theta: &HyperParams, times_a: &[f64], times_b: Option<&[f64]>) -> Result<DMatrix<f64>> {
    HyperParams::new(theta.h, theta.s, theta.k, theta.p)?;
    let finite = |ts: &[f64]| ts.iter().all(|t| t.is_finite());
    if !finite(times_a) || !times_b.map_or(true, finite) {
        return Err(Error::InvalidInput("times must be finite".into()));
    }
    Ok(match times_b {
        Some(times_b) => DMatrix::from_fn(times_a.len(), times_b.len(), |i, j| {
            theta.eval(times_a[i] - times_b[j])
        }),
        None => {
            let n = times_a.len();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = theta.eval(times_a[i] - times_a[j]);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        }
    })
}

/// Log marginal likelihood and its gradient.
pub fn log_marginal_likelihood(model: &GPModel, data: &TimeSeries) -> Result<(f64, LmlGradient)> {
    let (value, grad) = lml_impl(model, data, true, false)?;
    Ok((value, grad.expect("gradient requested")))
}

/// Log marginal likelihood only (cheaper: no trace terms).
pub fn log_marginal_likelihood_value(model: &GPModel, data: &TimeSeries) -> Result<f64> {
    Ok(lml_impl(model, data, false, false)?.0)
}

/// Shared implementation; `force_dense` exists so tests can compare the
/// Toeplitz fast path against the dense reference on the same data.
pub(crate) fn lml_impl(
    model: &GPModel,
    data: &TimeSeries,
    want_grad: bool,
    force_dense: bool,
) -> Result<(f64, Option<LmlGradient>)> {
    model.validate()?;
    data.validate()?;
    let n = data.len();
    let resid: Vec<f64> = data.values.iter().map(|v| v - model.mean).collect();
    let theta = &model.theta;

    let toeplitz_step = if force_dense { None } else { uniform_step(&data.times) };
    if let Some(dt) = toeplitz_step {
        let mut col: Vec<f64> = (0..n).map(|i| theta.eval(i as f64 * dt)).collect();
        col[0] += model.noise_var;
        let fact = toeplitz_factor(&col, &resid, want_grad)?;
        if fact.jitter > 0.0 {
            log::debug!("toeplitz factorization needed jitter {}", fact.jitter);
        }
        let alpha = &fact.alpha;
        let quad: f64 = resid.iter().zip(alpha).map(|(r, a)| r * a).sum();
        let value = -0.5 * quad - 0.5 * fact.logdet - 0.5 * n as f64 * (2.0 * PI).ln();
        if !want_grad {
            return Ok((value, None));
        }
        let dsum = fact.dsum.as_ref().expect("requested diagonal sums");
        // Lagged autocorrelations of alpha turn alpha^T G alpha into a
        // single pass over lags, since G shares the Toeplitz structure.
        let mut ac = vec![0.0; n];
        for m in 0..n {
            let mut acc = 0.0;
            for i in 0..n - m {
                acc += alpha[i] * alpha[i + m];
            }
            ac[m] = acc;
        }
        let mut partials = [0.0; 4];
        for (lag, &a) in ac.iter().enumerate() {
            let (_, g) = theta.eval_grad(lag as f64 * dt);
            let weight = if lag == 0 { 1.0 } else { 2.0 };
            for coord in 0..4 {
                partials[coord] += 0.5 * weight * g[coord] * (a - dsum[lag]);
            }
        }
        let alpha_sq: f64 = alpha.iter().map(|a| a * a).sum();
        let grad = LmlGradient {
            h: partials[0],
            s: partials[1],
            k: partials[2],
            p: partials[3],
            mean: alpha.iter().sum(),
            noise_var: 0.5 * (alpha_sq - dsum[0]),
        };
        return Ok((value, Some(grad)));
    }

    // Dense reference path.
    let mut c = gram(theta, &data.times, None)?;
    for i in 0..n {
        c[(i, i)] += model.noise_var;
    }
    let fact = dense_cholesky(&c)?;
    if fact.jitter > 0.0 {
        log::debug!("dense factorization needed jitter {}", fact.jitter);
    }
    let r_vec = DVector::from_column_slice(&resid);
    let alpha = fact.chol.solve(&r_vec);
    let value =
        -0.5 * r_vec.dot(&alpha) - 0.5 * dense_logdet(&fact.chol) - 0.5 * n as f64 * (2.0 * PI).ln();
    if !want_grad {
        return Ok((value, None));
    }
    let cinv = fact.chol.inverse();
    let mut partials = [0.0; 4];
    for i in 0..n {
        for j in i..n {
            let (_, g) = theta.eval_grad(data.times[i] - data.times[j]);
            let weight = if i == j { 1.0 } else { 2.0 };
            let quad_ij = alpha[i] * alpha[j];
            let trace_ij = cinv[(i, j)];
            for coord in 0..4 {
                partials[coord] += 0.5 * weight * g[coord] * (quad_ij - trace_ij);
            }
        }
    }
    let grad = LmlGradient {
        h: partials[0],
        s: partials[1],
        k: partials[2],
        p: partials[3],
        mean: alpha.sum(),
        noise_var: 0.5 * (alpha.norm_squared() - cinv.trace()),
    };
    Ok((value, Some(grad)))
}

/// Draws `count` zero-mean realizations of the process at `times`.
///
/// Each realization uses an RNG stream derived from `(seed, draw index)`, so
/// results do not depend on evaluation order.
pub fn sample(theta: &HyperParams, times: &[f64], seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    let c = gram(theta, times, None)?;
    let fact = dense_cholesky(&c)?;
    let l = fact.chol.l();
    let n = times.len();
    let mut draws = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        let z = DVector::from_fn(n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        draws.push((&l * z).as_slice().to_vec());
    }
    Ok(draws)
}

/// Posterior mean and variance of the latent process at `query_times`.
pub fn predict(
    model: &GPModel,
    data: &TimeSeries,
    query_times: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    model.validate()?;
    data.validate()?;
    if !query_times.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidInput("query times must be finite".into()));
    }
    let n = data.len();
    let mut c = gram(&model.theta, &data.times, None)?;
    for i in 0..n {
        c[(i, i)] += model.noise_var;
    }
    let fact = dense_cholesky(&c)?;
    let resid = DVector::from_fn(n, |i, _| data.values[i] - model.mean);
    let alpha = fact.chol.solve(&resid);
    let prior_var = model.theta.eval(0.0);

    let mut means = Vec::with_capacity(query_times.len());
    let mut vars = Vec::with_capacity(query_times.len());
    for &t in query_times {
        let kvec = DVector::from_fn(n, |i, _| model.theta.eval(t - data.times[i]));
        means.push(model.mean + kvec.dot(&alpha));
        let w = fact.chol.solve(&kvec);
        // Clamp the tiny negative values that exact interpolation produces
        // through rounding.
        vars.push((prior_var - kvec.dot(&w)).max(0.0));
    }
    Ok((means, vars))
}

/// Maximum-likelihood fit with random restarts.
///
/// Restart `i` draws its starting point from an RNG stream derived from
/// `(seed, i)`: `h, s, k ~ U[-2, 2]`, `p ~ U(-1, 1)`, mean at the data mean,
/// `log noise_var ~ U[-6, 0]`. The best local optimum is returned with `p`
/// mapped to the principal branch `[-1, 1]`.
pub fn fit(data: &TimeSeries, config: &FitConfig, restarts: usize, seed: u64) -> Result<FitResult> {
    data.validate()?;
    if data.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "fitting four kernel parameters needs at least 4 points, got {}",
            data.len()
        )));
    }
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    if !(config.fixed_noise_var >= 0.0 && config.fixed_noise_var.is_finite()) {
        return Err(Error::Config(format!(
            "fixed noise variance must be finite and nonnegative, got {}",
            config.fixed_noise_var
        )));
    }

    let data_mean = data.value_mean();
    let unpack = |x: &[f64]| -> GPModel {
        let theta = HyperParams { h: x[0], s: x[1], k: x[2], p: x[3] };
        let mut idx = 4;
        let mean = if config.fit_mean {
            idx += 1;
            x[idx - 1]
        } else {
            data_mean
        };
        let noise_var = if config.fit_noise { x[idx].exp() } else { config.fixed_noise_var };
        GPModel { theta, mean, noise_var }
    };
    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let model = unpack(x);
        if !model.noise_var.is_finite() {
            return None;
        }
        match lml_impl(&model, data, true, false) {
            Ok((value, grad)) => {
                let grad = grad.expect("gradient requested");
                let mut g = vec![-grad.h, -grad.s, -grad.k, -grad.p];
                if config.fit_mean {
                    g.push(-grad.mean);
                }
                if config.fit_noise {
                    // Chain rule through noise_var = exp(x).
                    g.push(-grad.noise_var * model.noise_var);
                }
                Some((-value, g))
            }
            Err(_) => None,
        }
    };

    let settings =
        OptSettings { max_iter: config.max_iter, grad_tol: config.grad_tol, f_tol: config.f_tol };
    let mut best: Option<optimize::OptOutcome> = None;
    let mut all_traces = Vec::with_capacity(restarts);
    for restart in 0..restarts {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let mut x0 = vec![
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-1.0..1.0),
        ];
        if config.fit_mean {
            x0.push(data_mean);
        }
        if config.fit_noise {
            x0.push(rng.random_range(-6.0..0.0));
        }
        let outcome = minimize(objective, &x0, &settings);
        all_traces.push(outcome.trace.iter().map(|&(i, f)| (i, -f)).collect::<Vec<_>>());
        let better = match &best {
            Some(b) => outcome.f < b.f,
            None => outcome.f.is_finite(),
        };
        if better {
            best = Some(outcome);
        }
    }

    let Some(best) = best else {
        return Err(Error::FitFailure { restarts, traces: all_traces });
    };
    let mut model = unpack(&best.x);
    // p and 2 - p describe the same kernel; report the representative in
    // [-1, 1].
    model.theta.p = principal_p(model.theta.p);
    let value = log_marginal_likelihood_value(&model, data)?;
    Ok(FitResult {
        model,
        log_marginal_likelihood: value,
        converged: best.converged,
        n_restarts_used: restarts,
        optimizer_trace: best.trace.iter().map(|&(i, f)| (i, -f)).collect(),
    })
}

/// Principal-branch representative of the asymmetry parameter,
/// `(2/pi) asin(sin(pi p / 2))`.
fn principal_p(p: f64) -> f64 {
    (2.0 / PI) * (std::f64::consts::FRAC_PI_2 * p).sin().asin()
}

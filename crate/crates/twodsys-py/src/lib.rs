//! Python bindings for the `twodsys` crate: the covariance family itself,
//! Gaussian process sampling, fitting, prediction, the oscillation
//! classifier, and the two-component system simulator.
//!
//! Parameter validation errors surface as `ValueError`; numerical
//! failures (conditioning, underflow, failed fits) surface as
//! `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use twodsys::kernel::{HyperParams, NaturalParams};
use twodsys::sde::{SimConfig, SystemSpec};
use twodsys::{gp, inference, FitConfig, GPModel, PriorSpec, TimeSeries};

fn to_py(err: twodsys::Error) -> PyErr {
    use twodsys::Error as E;
    match err {
        E::Conditioning { .. } | E::NumericalFailure(_) | E::FitFailure { .. } => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn series(times: Vec<f64>, values: Vec<f64>) -> PyResult<TimeSeries> {
    TimeSeries::new(times, values).map_err(to_py)
}

/// The four-parameter covariance family in its unconstrained form
/// (h, s, k, p).
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Params(HyperParams);

#[pymethods]
impl Params {
    #[new]
    fn new(h: f64, s: f64, k: f64, p: f64) -> PyResult<Self> {
        Ok(Params(HyperParams::new(h, s, k, p).map_err(to_py)?))
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }

    #[getter]
    fn s(&self) -> f64 {
        self.0.s
    }

    #[getter]
    fn k(&self) -> f64 {
        self.0.k
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }

    /// Covariance at signed lag `tau`.
    fn eval(&self, tau: f64) -> f64 {
        self.0.eval(tau)
    }

    /// Covariance and its partial derivatives in (h, s, k, p) at `tau`.
    fn eval_grad<'py>(&self, py: Python<'py>, tau: f64) -> PyResult<(f64, Bound<'py, PyDict>)> {
        let (c, g) = self.0.eval_grad(tau);
        let grad = PyDict::new(py);
        grad.set_item("h", g[0])?;
        grad.set_item("s", g[1])?;
        grad.set_item("k", g[2])?;
        grad.set_item("p", g[3])?;
        Ok((c, grad))
    }

    /// Constrained form (sigma, delta, s11, j).
    fn to_natural(&self) -> PyResult<Natural> {
        Ok(Natural(self.0.to_natural().map_err(to_py)?))
    }

    #[staticmethod]
    fn from_natural(sigma: f64, delta: f64, s11: f64, j: f64) -> PyResult<Self> {
        let np = NaturalParams::new(sigma, delta, s11, j).map_err(to_py)?;
        Ok(Params(HyperParams::from_natural(&np).map_err(to_py)?))
    }

    /// Quality factor of the oscillation; zero in the overdamped regime.
    fn q_factor(&self) -> f64 {
        self.0.q_factor()
    }

    /// One-sided derivative of the covariance as the lag leaves zero.
    fn right_derivative_at_zero(&self) -> f64 {
        self.0.right_derivative_at_zero()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(h={}, s={}, k={}, p={})",
            self.0.h, self.0.s, self.0.k, self.0.p
        )
    }
}

/// The covariance family in its constrained form (sigma, delta, s11, j).
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Natural(NaturalParams);

#[pymethods]
impl Natural {
    #[new]
    fn new(sigma: f64, delta: f64, s11: f64, j: f64) -> PyResult<Self> {
        Ok(Natural(NaturalParams::new(sigma, delta, s11, j).map_err(to_py)?))
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }

    #[getter]
    fn s11(&self) -> f64 {
        self.0.s11
    }

    #[getter]
    fn j(&self) -> f64 {
        self.0.j
    }

    fn to_params(&self) -> PyResult<Params> {
        Ok(Params(HyperParams::from_natural(&self.0).map_err(to_py)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Natural(sigma={}, delta={}, s11={}, j={})",
            self.0.sigma, self.0.delta, self.0.s11, self.0.j
        )
    }
}

/// A two-component linear stochastic system: drift entries (a, b; c, d)
/// and symmetric noise intensity (k11, k12; k12, k22).
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct System(SystemSpec);

#[pymethods]
impl System {
    #[new]
    #[allow(clippy::too_many_arguments)]
    fn new(a: f64, b: f64, c: f64, d: f64, k11: f64, k12: f64, k22: f64) -> PyResult<Self> {
        Ok(System(SystemSpec::new(a, b, c, d, k11, k12, k22).map_err(to_py)?))
    }

    fn is_stable(&self) -> bool {
        self.0.check_stability().stable
    }

    /// Mean damping times two, `a + d`.
    #[getter]
    fn damping(&self) -> f64 {
        self.0.check_stability().damping
    }

    #[getter]
    fn determinant(&self) -> f64 {
        self.0.check_stability().determinant
    }

    /// Covariance parameters of the stationary first component.
    fn to_kernel(&self) -> PyResult<Natural> {
        Ok(Natural(self.0.system_to_kernel().map_err(to_py)?))
    }

    /// Stationary state covariance as ((s11, s12), (s12, s22)).
    fn stationary_covariance(&self) -> PyResult<((f64, f64), (f64, f64))> {
        let s = self.0.stationary_covariance().map_err(to_py)?;
        Ok(((s[(0, 0)], s[(0, 1)]), (s[(1, 0)], s[(1, 1)])))
    }

    /// Integrates the system and returns (times, x1, x2).
    #[pyo3(signature = (dt, total_time, seed=0, burn_in=0.0, initial=None))]
    fn simulate(
        &self,
        dt: f64,
        total_time: f64,
        seed: u64,
        burn_in: f64,
        initial: Option<[f64; 2]>,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut cfg = SimConfig::new(dt, total_time, seed);
        cfg.burn_in = burn_in;
        cfg.initial_state = initial;
        let path = self.0.simulate(&cfg).map_err(to_py)?;
        Ok((path.times, path.x1, path.x2))
    }

    fn __repr__(&self) -> String {
        let s = &self.0;
        format!(
            "System(a={}, b={}, c={}, d={}, k11={}, k12={}, k22={})",
            s.a, s.b, s.c, s.d, s.k11, s.k12, s.k22
        )
    }
}

/// Draws of the zero-mean process on `times`; one list per realization.
#[pyfunction]
#[pyo3(signature = (params, times, seed=0, count=1))]
fn sample(params: Params, times: Vec<f64>, seed: u64, count: usize) -> PyResult<Vec<Vec<f64>>> {
    gp::sample(&params.0, &times, seed, count).map_err(to_py)
}

/// Gaussian log marginal likelihood of the data under the model.
#[pyfunction]
#[pyo3(signature = (params, times, values, mean=0.0, noise_var=0.0))]
fn log_marginal_likelihood(
    params: Params,
    times: Vec<f64>,
    values: Vec<f64>,
    mean: f64,
    noise_var: f64,
) -> PyResult<f64> {
    let model = GPModel::new(params.0, mean, noise_var).map_err(to_py)?;
    gp::log_marginal_likelihood_value(&model, &series(times, values)?).map_err(to_py)
}

/// Log marginal likelihood and its gradient as a dict over
/// (h, s, k, p, mean, noise_var).
#[pyfunction]
#[pyo3(signature = (params, times, values, mean=0.0, noise_var=0.0))]
fn log_marginal_likelihood_grad<'py>(
    py: Python<'py>,
    params: Params,
    times: Vec<f64>,
    values: Vec<f64>,
    mean: f64,
    noise_var: f64,
) -> PyResult<(f64, Bound<'py, PyDict>)> {
    let model = GPModel::new(params.0, mean, noise_var).map_err(to_py)?;
    let (value, g) =
        gp::log_marginal_likelihood(&model, &series(times, values)?).map_err(to_py)?;
    let grad = PyDict::new(py);
    grad.set_item("h", g.h)?;
    grad.set_item("s", g.s)?;
    grad.set_item("k", g.k)?;
    grad.set_item("p", g.p)?;
    grad.set_item("mean", g.mean)?;
    grad.set_item("noise_var", g.noise_var)?;
    Ok((value, grad))
}

/// Posterior mean and variance at the query times.
#[pyfunction]
#[pyo3(signature = (params, times, values, query, mean=0.0, noise_var=0.0))]
fn predict(
    params: Params,
    times: Vec<f64>,
    values: Vec<f64>,
    query: Vec<f64>,
    mean: f64,
    noise_var: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let model = GPModel::new(params.0, mean, noise_var).map_err(to_py)?;
    gp::predict(&model, &series(times, values)?, &query).map_err(to_py)
}

/// Maximum-likelihood fit with random restarts.
#[pyfunction]
#[pyo3(signature = (times, values, restarts=8, seed=0, fit_mean=true, fit_noise=true, fixed_noise_var=0.0))]
fn fit<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    values: Vec<f64>,
    restarts: usize,
    seed: u64,
    fit_mean: bool,
    fit_noise: bool,
    fixed_noise_var: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = FitConfig {
        fit_mean,
        fit_noise,
        fixed_noise_var,
        ..FitConfig::default()
    };
    let res = gp::fit(&series(times, values)?, &config, restarts, seed).map_err(to_py)?;
    let out = PyDict::new(py);
    let theta = res.model.theta;
    out.set_item("h", theta.h)?;
    out.set_item("s", theta.s)?;
    out.set_item("k", theta.k)?;
    out.set_item("p", theta.p)?;
    out.set_item("mean", res.model.mean)?;
    out.set_item("noise_var", res.model.noise_var)?;
    out.set_item("log_marginal_likelihood", res.log_marginal_likelihood)?;
    out.set_item("converged", res.converged)?;
    out.set_item("n_restarts_used", res.n_restarts_used)?;
    Ok(out)
}

/// Posterior odds that the data came from the oscillatory regime, with a
/// thresholded label. `prior_json` takes the same schema as the CLI's
/// prior files; by default the prior adapts to the data.
#[pyfunction]
#[pyo3(signature = (times, values, budget=20_000, threshold=10.0, seed=0, prior_json=None))]
fn classify<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    values: Vec<f64>,
    budget: usize,
    threshold: f64,
    seed: u64,
    prior_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let data = series(times, values)?;
    let prior = match prior_json {
        Some(text) => {
            let prior: PriorSpec = serde_json::from_str(text)
                .map_err(|e| PyValueError::new_err(format!("invalid prior: {e}")))?;
            prior.validate().map_err(to_py)?;
            prior
        }
        None => PriorSpec::default_for(&data).map_err(to_py)?,
    };
    let res = inference::classify(&data, &prior, threshold, budget, seed).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("label", res.label.to_string())?;
    out.set_item("log_odds", res.odds.log_odds)?;
    out.set_item("stderr", res.odds.stderr)?;
    out.set_item("p_oscillatory", res.odds.p_oscillatory)?;
    out.set_item("n_samples", res.odds.n_samples)?;
    Ok(out)
}

/// Lagged autocovariance estimates of an evenly sampled path:
/// a list of (lag, estimate, stderr) triples.
#[pyfunction]
fn empirical_autocov(path: Vec<f64>, dt: f64, max_lag: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let points = twodsys::sde::empirical_autocov(&path, dt, max_lag).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (p.lag, p.estimate, p.stderr)).collect())
}

#[pymodule]
fn twodsys_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_class::<Natural>()?;
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(log_marginal_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(log_marginal_likelihood_grad, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_autocov, m)?)?;
    Ok(())
}

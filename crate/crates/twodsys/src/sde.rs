//! The state-space view: a two-dimensional linear SDE driving the kernel.
//!
//! The system is
//!
//! ```text
//! dx = M x dt + dW,   M = [[-A, B], [C, -D]],   Cov(dW) = K dt
//! ```
//!
//! with `K` positive semi-definite. When `A + D > 0` and `AD - BC > 0` the
//! system is asymptotically stable and has a stationary state whose
//! autocovariance in the first component is exactly a member of the
//! covariance family in [`crate::kernel`], with
//!
//! ```text
//! sigma = (A + D) / 2,   delta = (A - D)^2 / 4 + B C.
//! ```
//!
//! This module is the independent oracle for that family: it solves the
//! Lyapunov equation in closed form, exponentiates `M` exactly, simulates
//! sample paths, and maps system matrices to kernel parameters.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::NaturalParams;
use crate::series::damped_terms;

/// A two-dimensional linear stochastic system.
///
/// `a`, `b`, `c`, `d` are the entries of the drift in the sign convention
/// `M = [[-a, b], [c, -d]]`; `k11`, `k12`, `k22` form the symmetric noise
/// intensity matrix. Stability is not required at construction (so that
/// [`check_stability`] can report on arbitrary systems) but is enforced by
/// every operation that needs a stationary state.
///
/// [`check_stability`]: SystemSpec::check_stability
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub k11: f64,
    pub k12: f64,
    pub k22: f64,
}

/// The two Hurwitz quantities deciding stability of a [`SystemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// True iff both quantities below are strictly positive.
    pub stable: bool,
    /// `A + D`, twice the mean damping rate.
    pub damping: f64,
    /// `AD - BC`, the determinant of the (negated) drift.
    pub determinant: f64,
}

/// Settings for Euler-Maruyama simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step; must satisfy `dt * (A + D) < 0.1`.
    pub dt: f64,
    /// Recorded duration after burn-in.
    pub total_time: f64,
    /// Discarded initial duration. The initial state is already drawn from
    /// the stationary law, so this defaults to zero and exists only for
    /// robustness experiments.
    pub burn_in: f64,
    pub seed: u64,
    /// Optional deterministic start; overrides the stationary draw.
    pub initial_state: Option<[f64; 2]>,
}

impl SimConfig {
    pub fn new(dt: f64, total_time: f64, seed: u64) -> Self {
        SimConfig { dt, total_time, burn_in: 0.0, seed, initial_state: None }
    }
}

/// A recorded two-component sample path on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePath {
    pub times: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

/// One entry of an empirical autocovariance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocovPoint {
    pub lag: f64,
    pub estimate: f64,
    pub stderr: f64,
}

impl SystemSpec {
    /// Validating constructor: entries finite, `K` positive semi-definite.
    pub fn new(a: f64, b: f64, c: f64, d: f64, k11: f64, k12: f64, k22: f64) -> Result<Self> {
        let spec = SystemSpec { a, b, c, d, k11, k12, k22 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d, self.k11, self.k12, self.k22];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "system entries must be finite, got {self:?}"
            )));
        }
        if self.k11 < 0.0 || self.k22 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise intensities must be nonnegative, got K11={}, K22={}",
                self.k11, self.k22
            )));
        }
        let det_k = self.k11 * self.k22 - self.k12 * self.k12;
        let scale = (self.k11 + self.k22) * (self.k11 + self.k22);
        if det_k < -1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "noise matrix is not positive semi-definite: det(K) = {det_k}"
            )));
        }
        Ok(())
    }

    /// Mean damping rate `sigma = (A + D) / 2`.
    pub fn sigma(&self) -> f64 {
        0.5 * (self.a + self.d)
    }

    /// Drift determinant `AD - BC`.
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Discriminant `(A - D)^2 / 4 + BC` of the drift eigenvalues.
    pub fn delta(&self) -> f64 {
        let half_gap = 0.5 * (self.a - self.d);
        half_gap * half_gap + self.b * self.c
    }

    /// Drift matrix `M = [[-A, B], [C, -D]]`.
    pub fn drift(&self) -> Matrix2<f64> {
        Matrix2::new(-self.a, self.b, self.c, -self.d)
    }

    /// Noise intensity matrix `K`.
    pub fn noise(&self) -> Matrix2<f64> {
        Matrix2::new(self.k11, self.k12, self.k12, self.k22)
    }

    /// Reports the Hurwitz stability conditions `A + D > 0`, `AD - BC > 0`.
    pub fn check_stability(&self) -> StabilityReport {
        let damping = self.a + self.d;
        let determinant = self.det();
        StabilityReport { stable: damping > 0.0 && determinant > 0.0, damping, determinant }
    }

    fn require_stable(&self) -> Result<()> {
        let report = self.check_stability();
        if !report.stable {
            return Err(Error::UnstableSystem(format!(
                "need A+D > 0 and AD-BC > 0, got A+D = {}, AD-BC = {}",
                report.damping, report.determinant
            )));
        }
        Ok(())
    }

    /// Matrix exponential `h(t) = exp(t M)` with `h(0) = I`.
    ///
    /// Uses the closed 2x2 form `e^{-sigma t} (g1 I + t g2 N)` with
    /// `N = M + sigma I`, `N^2 = delta I`; no stability required.
    pub fn impulse_response(&self, t: f64) -> Matrix2<f64> {
        let sigma = self.sigma();
        let delta = self.delta();
        let y = delta * t * t;
        // (sigma - sqrt(delta)) t without cancellation, valid when y is
        // large enough to take the grouped-exponential branch.
        let slow = if delta > 0.0 {
            self.det() * t / (sigma + delta.sqrt())
        } else {
            sigma * t
        };
        let (eg1, eg2, _) = damped_terms(sigma * t, y, slow);
        let n = self.drift() + Matrix2::identity() * sigma;
        Matrix2::identity() * eg1 + n * (t * eg2)
    }

    /// Stationary covariance `S` solving `M S + S M^T = -K`.
    ///
    /// The symmetric 2x2 Lyapunov equation reduces to a 3x3 linear system in
    /// `(S11, S12, S22)`.
    pub fn stationary_covariance(&self) -> Result<Matrix2<f64>> {
        self.require_stable()?;
        let SystemSpec { a, b, c, d, .. } = *self;
        let lhs = Matrix3::new(
            -2.0 * a,
            2.0 * b,
            0.0,
            c,
            -(a + d),
            b,
            0.0,
            2.0 * c,
            -2.0 * d,
        );
        let rhs = Vector3::new(-self.k11, -self.k12, -self.k22);
        let sol = lhs.lu().solve(&rhs).ok_or_else(|| {
            Error::DegenerateSystem("stationary covariance solve is singular".into())
        })?;
        Ok(Matrix2::new(sol[0], sol[1], sol[1], sol[2]))
    }

    /// Maps the system to the natural parameters of its output covariance.
    ///
    /// The first component of the stationary state has autocovariance
    /// `C11(tau) = e^{-sigma |tau|} (S11 cosh(sqrt(delta) tau) + J sigma
    /// sinh(sqrt(delta)|tau|)/sqrt(delta))` with `S11` from the Lyapunov
    /// solution and the asymmetry ratio
    ///
    /// ```text
    /// j = J/S11 = (P - K11 det) / (P + K11 det),
    /// P = D^2 K11 + 2 B D K12 + B^2 K22,
    /// ```
    ///
    /// which is exactly `+1` on the codimension-one set `K11 det = 0`.
    pub fn system_to_kernel(&self) -> Result<NaturalParams> {
        self.require_stable()?;
        let s = self.stationary_covariance()?;
        let s11 = s[(0, 0)];
        if s11 <= 0.0 {
            return Err(Error::DegenerateSystem(format!(
                "no stationary variance reaches the observed component (S11 = {s11})"
            )));
        }
        let p_quad =
            (self.d * self.d * self.k11 + 2.0 * self.b * self.d * self.k12
                + self.b * self.b * self.k22)
                .max(0.0);
        let q = self.k11 * self.det();
        if p_quad + q <= 0.0 {
            return Err(Error::DegenerateSystem(
                "noise does not excite the observed component".into(),
            ));
        }
        let j_ratio = ((p_quad - q) / (p_quad + q)).clamp(-1.0, 1.0);
        NaturalParams::new(self.sigma(), self.delta(), s11, s11 * j_ratio)
    }

    /// Euler-Maruyama simulation of the system, stationary by construction.
    ///
    /// The initial state is drawn from the stationary law (or taken from
    /// `cfg.initial_state`), then `x_{n+1} = x_n + dt M x_n + sqrt(dt) L z_n`
    /// with `L L^T = K`. Deterministic for a given seed.
    pub fn simulate(&self, cfg: &SimConfig) -> Result<StatePath> {
        self.validate()?;
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive and finite, got {}", cfg.dt)));
        }
        if !(cfg.total_time > 0.0 && cfg.total_time.is_finite()) {
            return Err(Error::Config(format!(
                "total_time must be positive and finite, got {}",
                cfg.total_time
            )));
        }
        if !(cfg.burn_in >= 0.0 && cfg.burn_in.is_finite()) {
            return Err(Error::Config(format!(
                "burn_in must be nonnegative and finite, got {}",
                cfg.burn_in
            )));
        }
        if cfg.dt * (self.a + self.d) >= 0.1 {
            return Err(Error::Config(format!(
                "dt = {} too coarse: need dt * (A+D) < 0.1, got {}",
                cfg.dt,
                cfg.dt * (self.a + self.d)
            )));
        }
        self.require_stable()?;

        let noise_root = psd_sqrt(&self.noise());
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let draw = |rng: &mut ChaCha12Rng| {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            Vector2::new(z1, z2)
        };

        let mut x = match cfg.initial_state {
            Some([x1, x2]) => Vector2::new(x1, x2),
            None => {
                let stat_root = psd_sqrt(&self.stationary_covariance()?);
                stat_root * draw(&mut rng)
            }
        };

        let drift = self.drift();
        let sqrt_dt = cfg.dt.sqrt();
        let burn_steps = (cfg.burn_in / cfg.dt).round() as usize;
        let record_steps = (cfg.total_time / cfg.dt).round() as usize;
        if record_steps == 0 {
            return Err(Error::Config("total_time shorter than one step".into()));
        }

        for _ in 0..burn_steps {
            x += drift * x * cfg.dt + noise_root * draw(&mut rng) * sqrt_dt;
        }
        let mut path = StatePath {
            times: Vec::with_capacity(record_steps + 1),
            x1: Vec::with_capacity(record_steps + 1),
            x2: Vec::with_capacity(record_steps + 1),
        };
        path.times.push(0.0);
        path.x1.push(x[0]);
        path.x2.push(x[1]);
        for i in 1..=record_steps {
            x += drift * x * cfg.dt + noise_root * draw(&mut rng) * sqrt_dt;
            path.times.push(i as f64 * cfg.dt);
            path.x1.push(x[0]);
            path.x2.push(x[1]);
        }
        Ok(path)
    }
}

/// Symmetric psd square root of a symmetric 2x2 matrix.
///
/// Eigenvalues below `1e-12 * trace` are clamped to zero so that boundary
/// psd matrices (rank-one noise, exactly the j = ±1 cases) stay exactly on
/// the boundary instead of failing.
fn psd_sqrt(m: &Matrix2<f64>) -> Matrix2<f64> {
    let (m11, m12, m22) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let phi = 0.5 * (2.0 * m12).atan2(m11 - m22);
    let (sin, cos) = phi.sin_cos();
    let lam1 = cos * cos * m11 + 2.0 * cos * sin * m12 + sin * sin * m22;
    let lam2 = sin * sin * m11 - 2.0 * cos * sin * m12 + cos * cos * m22;
    let floor = 1e-12 * (m11 + m22).abs();
    let r1 = if lam1 > floor { lam1.sqrt() } else { 0.0 };
    let r2 = if lam2 > floor { lam2.sqrt() } else { 0.0 };
    Matrix2::new(
        cos * cos * r1 + sin * sin * r2,
        cos * sin * (r1 - r2),
        cos * sin * (r1 - r2),
        sin * sin * r1 + cos * cos * r2,
    )
}

/// Biased (1/N) autocovariance of `path` after mean removal, with batch-means
/// standard errors, at lags `0, dt, ..., <= max_lag`.
///
/// Requires `path.len() * dt > 10 * max_lag` so every lag retains enough
/// effectively independent pairs.
pub fn empirical_autocov(path: &[f64], dt: f64, max_lag: f64) -> Result<Vec<AutocovPoint>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if !(max_lag >= 0.0 && max_lag.is_finite()) {
        return Err(Error::InvalidInput(format!("max_lag must be nonnegative, got {max_lag}")));
    }
    if path.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("path contains non-finite values".into()));
    }
    let n = path.len();
    if (n as f64) * dt <= 10.0 * max_lag {
        return Err(Error::InsufficientData(format!(
            "path spans {:.3} time units but 10 * max_lag = {:.3} are required",
            n as f64 * dt,
            10.0 * max_lag
        )));
    }
    let n_lags = (max_lag / dt).floor() as usize;
    let mean = path.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = path.iter().map(|v| v - mean).collect();

    let mut out = Vec::with_capacity(n_lags + 1);
    for lag in 0..=n_lags {
        let m = n - lag;
        // Batch means over the lagged-product series z_i = y_i y_{i+lag}.
        let n_batches = 20.min(m);
        let mut batch_means = Vec::with_capacity(n_batches);
        let mut total = 0.0;
        for b in 0..n_batches {
            let lo = b * m / n_batches;
            let hi = (b + 1) * m / n_batches;
            let sum: f64 = (lo..hi).map(|i| centered[i] * centered[i + lag]).sum();
            total += sum;
            batch_means.push(sum / (hi - lo) as f64);
        }
        let estimate = total / n as f64;
        let grand = batch_means.iter().sum::<f64>() / n_batches as f64;
        let var_of_mean = if n_batches > 1 {
            batch_means.iter().map(|v| (v - grand) * (v - grand)).sum::<f64>()
                / ((n_batches - 1) as f64 * n_batches as f64)
        } else {
            f64::NAN
        };
        let stderr = (m as f64 / n as f64) * var_of_mean.sqrt();
        out.push(AutocovPoint { lag: lag as f64 * dt, estimate, stderr });
    }
    Ok(out)
}

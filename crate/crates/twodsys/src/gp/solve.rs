//! Linear-algebra backends for the marginal likelihood.
//!
//! Observations on a uniform time grid produce a symmetric positive-definite
//! Toeplitz Gram matrix, which is handled in O(n^2): Levinson-Durbin
//! recursion for the solve and log-determinant, and Gohberg-Semencul
//! diagonal sums of the inverse for the gradient traces. Irregular grids
//! fall back to dense Cholesky. Both paths share one jitter ladder.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Diagonal loading attempts, absolute, scaled to the mean diagonal:
/// none first, then 1e-12 .. 1e-6 in decades.
pub(crate) fn jitter_ladder(mean_diag: f64) -> Vec<f64> {
    let mut levels = Vec::with_capacity(8);
    levels.push(0.0);
    let mut rel = 1e-12;
    while rel < 1.5e-6 {
        levels.push(rel * mean_diag);
        rel *= 10.0;
    }
    levels
}

pub(crate) struct DenseFactor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Cholesky factorization with the jitter ladder.
pub(crate) fn dense_cholesky(c: &DMatrix<f64>) -> Result<DenseFactor> {
    let n = c.nrows();
    let mean_diag = c.diagonal().sum() / n as f64;
    let mut attempted = Vec::new();
    for jitter in jitter_ladder(mean_diag) {
        attempted.push(jitter);
        let mut work = c.clone();
        for i in 0..n {
            work[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(work) {
            return Ok(DenseFactor { chol, jitter });
        }
    }
    Err(Error::Conditioning { jitters: attempted })
}

/// Log-determinant from a Cholesky factor.
pub(crate) fn dense_logdet(factor: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * factor.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

#[derive(Debug)]
pub(crate) struct ToeplitzFactor {
    pub logdet: f64,
    /// `T^{-1} rhs`.
    pub alpha: Vec<f64>,
    /// `dsum[m]` = sum of the m-th superdiagonal of `T^{-1}`; present only
    /// when requested (needed for gradient traces).
    pub dsum: Option<Vec<f64>>,
    pub jitter: f64,
}

/// Solves the symmetric positive-definite Toeplitz system given by first
/// column `col` (jitter ladder applied to `col[0]`), returning the
/// log-determinant, the solution, and optionally the diagonal sums of the
/// inverse.
pub(crate) fn toeplitz_factor(
    col: &[f64],
    rhs: &[f64],
    with_dsum: bool,
) -> Result<ToeplitzFactor> {
    let mut attempted = Vec::new();
    for jitter in jitter_ladder(col[0]) {
        attempted.push(jitter);
        let mut loaded = col.to_vec();
        loaded[0] += jitter;
        if let Some((logdet, alpha, dsum)) = levinson(&loaded, rhs, with_dsum) {
            return Ok(ToeplitzFactor { logdet, alpha, dsum, jitter });
        }
    }
    Err(Error::Conditioning { jitters: attempted })
}

/// Levinson-Durbin recursion on the normalized system, `None` on breakdown
/// (the matrix is then not numerically positive definite).
///
/// The prediction-error variances `beta_k` of the Durbin half give the
/// log-determinant; the final predictor polynomial generates the inverse via
/// the Gohberg-Semencul representation, of which only diagonal sums are
/// accumulated.
fn levinson(col: &[f64], rhs: &[f64], with_dsum: bool) -> Option<(f64, Vec<f64>, Option<Vec<f64>>)> {
    let n = col.len();
    let t0 = col[0];
    if !(t0 > 0.0) || !t0.is_finite() {
        return None;
    }
    let rho: Vec<f64> = col.iter().map(|v| v / t0).collect();
    let b: Vec<f64> = rhs.iter().map(|v| v / t0).collect();

    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    x[0] = b[0];
    let mut beta = 1.0;
    let mut alpha = 0.0;
    if n > 1 {
        alpha = -rho[1];
        y[0] = alpha;
    }
    let mut logdet_hat = 0.0;
    for k in 1..n {
        beta *= 1.0 - alpha * alpha;
        if !(beta > 0.0) || !beta.is_finite() {
            return None;
        }
        logdet_hat += beta.ln();
        let mut dot = 0.0;
        for i in 0..k {
            dot += rho[i + 1] * x[k - 1 - i];
        }
        let mu = (b[k] - dot) / beta;
        for i in 0..k {
            x[i] += mu * y[k - 1 - i];
        }
        x[k] = mu;
        if k < n - 1 {
            let mut dot = 0.0;
            for i in 0..k {
                dot += rho[i + 1] * y[k - 1 - i];
            }
            alpha = -(rho[k + 1] + dot) / beta;
            // Symmetric in-place update y[i] += alpha * y[k-1-i]; pairs must
            // read each other's old values.
            let (mut lo, mut hi) = (0, k - 1);
            while lo < hi {
                let (a, bb) = (y[lo], y[hi]);
                y[lo] = a + alpha * bb;
                y[hi] = bb + alpha * a;
                lo += 1;
                hi -= 1;
            }
            if lo == hi {
                y[lo] += alpha * y[lo];
            }
            y[k] = alpha;
        }
    }
    let logdet = n as f64 * t0.ln() + logdet_hat;

    let dsum = if with_dsum {
        // Predictor a = (1, y_1 .. y_{n-1}) satisfies T a = v e_1 with
        // v = t0 * beta_final; Gohberg-Semencul then expresses T^{-1} through
        // triangular Toeplitz factors built from a, and the m-th diagonal sum
        // reduces to weighted autocorrelations of a and its reversal.
        let v = t0 * beta;
        let mut a = vec![0.0; n];
        a[0] = 1.0;
        a[1..n].copy_from_slice(&y[..n - 1]);
        let mut atil = vec![0.0; n];
        for u in 1..n {
            atil[u] = a[n - u];
        }
        let mut dsum = vec![0.0; n];
        for m in 0..n {
            let mut acc = 0.0;
            for u in 0..n - m {
                acc += (n - m - u) as f64 * (a[u] * a[u + m] - atil[u] * atil[u + m]);
            }
            dsum[m] = acc / v;
        }
        Some(dsum)
    } else {
        None
    };
    Some((logdet, x, dsum))
}

/// Detects a uniform grid, returning its step.
///
/// The tolerance is a 1e-9 relative deviation per gap; grids built as
/// `i * dt` pass exactly, while data with rounded or ragged stamps fall back
/// to the dense path.
pub(crate) fn uniform_step(times: &[f64]) -> Option<f64> {
    let n = times.len();
    if n < 2 {
        return None;
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return None;
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return None;
        }
    }
    Some(dt)
}

//! Stable evaluation of exponentially damped hyperbolic terms.
//!
//! Both the covariance kernel and the matrix exponential of a 2x2 system
//! reduce to the three even functions
//!
//! ```text
//! g1(y) = cosh(sqrt(y))            = sum_m y^m / (2m)!
//! g2(y) = sinh(sqrt(y)) / sqrt(y)  = sum_m y^m / (2m+1)!
//! g3(y) = (g1(y) - g2(y)) / y      = sum_m 2m y^(m-1) / (2m+1)!
//! ```
//!
//! evaluated at `y = delta * r^2` together with a damping factor
//! `exp(-sigma * r)`. For `y < 0` these are the trig pair `cos`/`sinc`; for
//! large positive `y` the product `exp(-sigma r) * cosh(sqrt(y) ...)` must be
//! grouped into single exponentials to avoid overflow and catastrophic
//! cancellation. This module centralizes the branch logic so the kernel and
//! the state-space code cannot drift apart.

/// Below this magnitude of `y` the power series is used for all three terms.
///
/// The value balances series truncation against cancellation in the closed
/// forms; agreement across the seam is ~1e-12 in relative terms.
const SERIES_CUTOFF: f64 = 0.09;

/// Power series for `(g1, g2, g3)` at small `|y|`.
///
/// Converges in a handful of terms for `|y| <= SERIES_CUTOFF` but is valid
/// (if slow) for any finite `y`.
pub(crate) fn g_series(y: f64) -> (f64, f64, f64) {
    let mut g1 = 1.0;
    let mut g2 = 1.0;
    let mut g3 = 1.0 / 3.0;
    // Terms: t1 = y^m/(2m)!, t2 = y^m/(2m+1)!, t3 = 2m y^(m-1)/(2m+1)!.
    let mut t1 = 1.0;
    let mut t2 = 1.0;
    let mut t3 = 1.0 / 3.0;
    for m in 1..60usize {
        let m_f = m as f64;
        t1 *= y / ((2.0 * m_f - 1.0) * (2.0 * m_f));
        t2 *= y / ((2.0 * m_f) * (2.0 * m_f + 1.0));
        g1 += t1;
        g2 += t2;
        // t3 steps from index m to m+1.
        t3 *= y * (m_f + 1.0) / (m_f * (2.0 * m_f + 2.0) * (2.0 * m_f + 3.0));
        g3 += t3;
        if t1.abs() <= f64::EPSILON * g1.abs()
            && t2.abs() <= f64::EPSILON * g2.abs()
            && t3.abs() <= f64::EPSILON * g3.abs()
        {
            break;
        }
    }
    (g1, g2, g3)
}

/// Computes `exp(-sigma_r) * (g1(y), g2(y), g3(y))` without overflow.
///
/// * `sigma_r` is the damping exponent `sigma * r` with `r >= 0`.
/// * `y` is `delta * r^2`, of either sign.
/// * `slow_exponent` must equal `(sigma - sqrt(delta)) * r`, computed by the
///   caller in a cancellation-free form. It is only read when
///   `y > SERIES_CUTOFF`, where naive subtraction would lose precision for
///   `delta` close to `sigma^2`.
///
/// Returns `(E*g1, E*g2, E*g3)` with `E = exp(-sigma_r)`.
pub(crate) fn damped_terms(sigma_r: f64, y: f64, slow_exponent: f64) -> (f64, f64, f64) {
    if y.abs() <= SERIES_CUTOFF {
        let e = (-sigma_r).exp();
        let (g1, g2, g3) = g_series(y);
        (e * g1, e * g2, e * g3)
    } else if y > 0.0 {
        // cosh/sinh regrouped as half-sums of pure exponentials. The slow
        // mode exp(-(sigma - sqrt(delta)) r) dominates at large lag.
        let x = y.sqrt();
        let em = (-slow_exponent).exp();
        let ep = (-(sigma_r + x)).exp();
        let eg1 = 0.5 * (em + ep);
        let eg2 = 0.5 * (em - ep) / x;
        let eg3 = (eg1 - eg2) / y;
        (eg1, eg2, eg3)
    } else {
        // Oscillatory regime: plain damped trig.
        let x = (-y).sqrt();
        let e = (-sigma_r).exp();
        let eg1 = e * x.cos();
        let eg2 = e * (x.sin() / x);
        let eg3 = (eg1 - eg2) / y;
        (eg1, eg2, eg3)
    }
}

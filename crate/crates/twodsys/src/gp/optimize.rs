//! Minimal BFGS minimizer with Armijo backtracking.
//!
//! The marginal-likelihood surface is smooth but multimodal and can be
//! evaluated only where the Gram matrix factorizes, so the objective is
//! allowed to fail: it returns `None` at infeasible points and the line
//! search treats those as +infinity.

use nalgebra::{DMatrix, DVector};

pub(crate) struct OptOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    /// (iteration, objective) after each accepted step, starting at 0.
    pub trace: Vec<(usize, f64)>,
}

pub(crate) struct OptSettings {
    pub max_iter: usize,
    /// Convergence when `|grad|_inf <= grad_tol * (1 + |f|)`.
    pub grad_tol: f64,
    /// Convergence when an accepted step changes f by less than
    /// `f_tol * (1 + |f|)`.
    pub f_tol: f64,
}

impl Default for OptSettings {
    fn default() -> Self {
        OptSettings { max_iter: 200, grad_tol: 1e-6, f_tol: 1e-11 }
    }
}

/// Minimizes `objective` from `x0`. The objective returns `(value,
/// gradient)` or `None` where it cannot be evaluated.
pub(crate) fn minimize<F>(mut objective: F, x0: &[f64], settings: &OptSettings) -> OptOutcome
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let d = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut trace = Vec::new();

    let Some((mut f, g0)) = objective(x.as_slice()).filter(|(f, _)| f.is_finite()) else {
        return OptOutcome { x: x0.to_vec(), f: f64::INFINITY, converged: false, trace };
    };
    let mut g = DVector::from_vec(g0);
    trace.push((0, f));

    let mut h_inv = DMatrix::<f64>::identity(d, d) / g.norm().max(1.0);
    let mut scaled_once = false;
    let mut converged = false;

    for iter in 1..=settings.max_iter {
        if g.amax() <= settings.grad_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            // Curvature information went bad; restart from steepest descent.
            h_inv = DMatrix::identity(d, d) / g.norm().max(1.0);
            scaled_once = false;
            dir = -(&h_inv * &g);
            slope = g.dot(&dir);
        }

        // Armijo backtracking.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let x_new = &x + &dir * step;
            if let Some((f_new, g_new)) = objective(x_new.as_slice()) {
                if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                    accepted = Some((x_new, f_new, DVector::from_vec(g_new)));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No admissible step: the current point is as far as the model
            // takes us. Report convergence only if the gradient is small.
            converged = g.amax() <= settings.grad_tol * (1.0 + f.abs());
            break;
        };

        let s_vec = &x_new - &x;
        let y_vec = &g_new - &g;
        let sy = s_vec.dot(&y_vec);
        if sy > 1e-10 * s_vec.norm() * y_vec.norm() {
            if !scaled_once {
                // Nocedal-Wright initial scaling before the first update.
                h_inv = DMatrix::identity(d, d) * (sy / y_vec.norm_squared());
                scaled_once = true;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y_vec;
            let yhy = y_vec.dot(&hy);
            let s_hy_t = &s_vec * hy.transpose();
            h_inv -= (&s_hy_t + s_hy_t.transpose()) * rho;
            h_inv += (&s_vec * s_vec.transpose()) * (rho + rho * rho * yhy);
        }

        let f_drop = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push((iter, f));
        if f_drop.abs() <= settings.f_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
    }

    OptOutcome { x: x.as_slice().to_vec(), f, converged, trace }
}

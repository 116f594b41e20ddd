//! Randomized invariants over the public API.

use nalgebra::DVector;
use proptest::prelude::*;
use twodsys::{gp, kernel::HyperParams, sde::SystemSpec, GPModel, TimeSeries};

fn params() -> impl Strategy<Value = HyperParams> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64)
        .prop_map(|(h, s, k, p)| HyperParams::new(h, s, k, p).unwrap())
}

/// Strictly increasing times on a dyadic lattice, so that shifting or
/// differencing them is exact in floating point.
fn dyadic_times() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..=16, 3..10).prop_map(|gaps| {
        let mut t = 0.0;
        let mut times = vec![0.0];
        for g in gaps {
            t += g as f64 / 8.0;
            times.push(t);
        }
        times
    })
}

fn stable_system() -> impl Strategy<Value = SystemSpec> {
    (
        0.05..3.0f64,
        0.05..3.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
        0.01..2.0f64,
        0.0..2.0f64,
        -0.99..0.99f64,
    )
        .prop_filter_map("needs positive determinant", |(a, d, b, c, k11, k22, rho)| {
            if a * d - b * c <= 1e-3 {
                return None;
            }
            let k12 = rho * (k11 * k22).sqrt();
            Some(SystemSpec::new(a, b, c, d, k11, k12, k22).unwrap())
        })
}

proptest! {
    #[test]
    fn covariance_is_even(theta in params(), tau in -20.0..20.0f64) {
        prop_assert_eq!(theta.eval(tau), theta.eval(-tau));
    }

    #[test]
    fn covariance_peaks_at_zero(theta in params(), tau in -50.0..50.0f64) {
        prop_assert!(theta.eval(tau).abs() <= theta.eval(0.0) * (1.0 + 1e-12));
    }

    #[test]
    fn parametrizations_round_trip(theta in params()) {
        let natural = theta.to_natural().unwrap();
        prop_assert!(natural.validate().is_ok());
        let back = HyperParams::from_natural(&natural).unwrap();
        prop_assert!((back.h - theta.h).abs() <= 1e-12 * theta.h.abs().max(1.0));
        prop_assert!((back.s - theta.s).abs() <= 1e-12 * theta.s.abs().max(1.0));
        prop_assert!((back.k - theta.k).abs() <= 1e-12 * theta.k.abs().max(1.0));
        prop_assert!((back.p - theta.p).abs() <= 1e-12 * theta.p.abs().max(1.0));
    }

    #[test]
    fn stable_systems_land_inside_the_constraint_set(spec in stable_system()) {
        let natural = spec.system_to_kernel().unwrap();
        prop_assert!(natural.validate().is_ok());
        prop_assert!(natural.sigma > 0.0);
        prop_assert!(natural.delta < natural.sigma * natural.sigma);
        prop_assert!(natural.s11 > 0.0);
        prop_assert!(natural.j.abs() <= natural.s11 * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_matrices_are_positive_semidefinite(
        theta in params(),
        gaps in prop::collection::vec(0.05..1.5f64, 5..12),
    ) {
        let mut t = 0.0;
        let mut times = vec![0.0];
        for g in &gaps {
            t += g;
            times.push(t);
        }
        let g = gp::gram(&theta, &times, None).unwrap();
        let eigs = g.clone().symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-8 * g.trace(), "min eigenvalue {} trace {}", min, g.trace());
    }

    #[test]
    fn uniform_grid_likelihood_matches_a_dense_reference(
        theta in params(),
        dt in 0.1..1.0f64,
        n in 4usize..16,
        seed in 0u64..1000,
        noise in 0.01..0.3f64,
    ) {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let values = gp::sample(&theta, &times, seed, 1).unwrap().remove(0);
        let data = TimeSeries::new(times.clone(), values.clone()).unwrap();
        let model = GPModel { theta, mean: 0.1, noise_var: noise };
        let fast = gp::log_marginal_likelihood_value(&model, &data).unwrap();

        // Independent dense computation of the same Gaussian density.
        let mut c = gp::gram(&theta, &times, None).unwrap();
        for i in 0..n {
            c[(i, i)] += noise;
        }
        let chol = c.cholesky().unwrap();
        let r = DVector::from_iterator(n, values.iter().map(|v| v - 0.1));
        let alpha = chol.solve(&r);
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let dense = -0.5 * r.dot(&alpha)
            - 0.5 * logdet
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        prop_assert!(
            (fast - dense).abs() <= 1e-9 * dense.abs().max(1.0),
            "fast {} dense {}",
            fast,
            dense
        );
    }

    #[test]
    fn likelihood_is_invariant_under_time_translation(
        theta in params(),
        times in dyadic_times(),
        seed in 0u64..1000,
        shift in 1u32..=256,
    ) {
        let values = gp::sample(&theta, &times, seed, 1).unwrap().remove(0);
        let model = GPModel { theta, mean: 0.0, noise_var: 0.05 };
        let base = TimeSeries::new(times.clone(), values.clone()).unwrap();
        let moved = TimeSeries::new(
            times.iter().map(|t| t + shift as f64 / 4.0).collect(),
            values,
        )
        .unwrap();
        let a = gp::log_marginal_likelihood_value(&model, &base).unwrap();
        let b = gp::log_marginal_likelihood_value(&model, &moved).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn value_scaling_shifts_the_likelihood_by_n_log_lambda(
        theta in params(),
        times in dyadic_times(),
        seed in 0u64..1000,
        lam in 1.5..4.0f64,
    ) {
        let values = gp::sample(&theta, &times, seed, 1).unwrap().remove(0);
        let n = times.len();
        let base = TimeSeries::new(times.clone(), values.clone()).unwrap();
        let scaled = TimeSeries::new(
            times,
            values.iter().map(|v| lam * v).collect(),
        )
        .unwrap();
        let model = GPModel { theta, mean: 0.0, noise_var: 0.02 };
        let scaled_model = GPModel {
            theta: HyperParams { k: theta.k + lam.ln(), ..theta },
            mean: 0.0,
            noise_var: lam * lam * 0.02,
        };
        let a = gp::log_marginal_likelihood_value(&model, &base).unwrap();
        let b = gp::log_marginal_likelihood_value(&scaled_model, &scaled).unwrap();
        prop_assert!(
            (b - a + n as f64 * lam.ln()).abs() <= 1e-8,
            "a {} b {}",
            a,
            b
        );
    }
}

//! Randomized checks of the first-iteration saddle point.

use clup_core::theory::{solve_first_iteration, xi_rd1};
use proptest::prelude::*;

const CASES: u32 = 200;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn saddle_is_stationary_and_self_consistent(alpha in 0.6f64..1.5, snr_db in 6.0f64..20.0) {
        let sigma = 10f64.powf(-snr_db / 20.0);
        let t = solve_first_iteration(alpha, sigma).unwrap();
        let f = |c: f64, g: f64| xi_rd1(alpha, sigma, c, g).unwrap();

        let h = 1e-6;
        let dg = (f(t.c1z_hat, t.gamma_hat + h) - f(t.c1z_hat, t.gamma_hat - h)) / (2.0 * h);
        prop_assert!(dg.abs() <= 1e-5, "d xi / d gamma = {dg}");

        // Maximum in gamma.
        let step = 1e-2 * t.gamma_hat;
        prop_assert!(f(t.c1z_hat, t.gamma_hat + step) <= t.xi);
        prop_assert!(f(t.c1z_hat, t.gamma_hat - step) <= t.xi);
        // Stationary in c at fixed gamma_hat as well.
        let dc = (f(t.c1z_hat + h, t.gamma_hat) - f(t.c1z_hat - h, t.gamma_hat)) / (2.0 * h);
        prop_assert!(dc.abs() <= 1e-4, "d xi / d c = {dc}");

        prop_assert!((t.e_zsq - t.c1z_hat).abs() < 1e-6, "e_zsq {} vs c {}", t.e_zsq, t.c1z_hat);
        prop_assert!((t.d2_pred - (t.e_zsq + 2.0 * t.d1_pred - 1.0)).abs() < 1e-12);
        prop_assert!((0.0..0.5).contains(&t.p_err1));
        prop_assert!(t.d1_pred > 0.0 && t.d1_pred <= 1.0);
    }
}

//! First-iteration random duality predictions for the polytope-start variant.
//!
//! In the large-`n` limit the relaxation error `z = x_sol − x^(1,s)` decouples
//! per coordinate: with `h` standard normal and a dual variable `gamma > 0`,
//!
//! ```text
//!     sqrt(n) z_i = clip(−h / (2 gamma), 0, 2)
//! ```
//!
//! and the normalized relaxation objective is the saddle value
//!
//! ```text
//!     xi(c, gamma) = sqrt(alpha) sqrt(c + sigma²) + I11(gamma) + I21(gamma) − gamma c
//!     min_{0 <= c <= 4} max_{gamma} xi(c, gamma)
//! ```
//!
//! where `I11 + I21 = E min_{u in [0,2]} (h u + gamma u²)`, split into the
//! interior branch `−4 gamma < h < 0` (`I11`) and the clipped branch
//! `h < −4 gamma` (`I21`).

use serde::Serialize;

use crate::error::{ClupError, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;

/// Initial upper end of the `gamma` search; doubled while the profile is
/// still increasing there.
const GAMMA_SEARCH_MAX: f64 = 64.0;
const GAMMA_EXPANSIONS: usize = 60;
/// Argument tolerance of both golden-section searches, scaled by `1 + |arg|`.
const ARG_TOL: f64 = 1e-10;
/// Below this the inner maximizer is treated as sitting on `gamma = 0`.
const GAMMA_BOUNDARY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryFirstIter {
    pub alpha: f64,
    pub sigma: f64,
    pub gamma_hat: f64,
    pub c1z_hat: f64,
    /// Saddle value.
    pub xi: f64,
    /// Kept at 0 for alignment with later iterations.
    pub nu_hat: f64,
    /// Kept at 0 for alignment with later iterations.
    pub s1_hat: f64,
    pub p_err1: f64,
    /// `sqrt(n) E z_i`.
    pub e_z: f64,
    /// `n E z_i²`.
    pub e_zsq: f64,
    /// Predicted `x_solᵀ x^(1,s)`.
    pub d1_pred: f64,
    /// Predicted `‖x^(1,s)‖²`.
    pub d2_pred: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(ClupError::InvalidArgument(format!("gamma must be positive, got {gamma}")))
    }
}

/// Closed forms of the interior (`I11`) and clipped (`I21`) branches.
pub fn integrals_i(gamma: f64) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    Ok((i11(gamma), i21(gamma)))
}

fn i11(gamma: f64) -> f64 {
    let g4 = 4.0 * gamma;
    let tail = (-0.5 * g4 * g4).exp();
    -(tail * (-g4) + SQRT_PI_OVER_2 * libm::erf(2.0 * std::f64::consts::SQRT_2 * gamma)) / (4.0 * SQRT_2PI * gamma)
}

fn i21(gamma: f64) -> f64 {
    let g4 = 4.0 * gamma;
    2.0 * gamma * libm::erfc(g4 / std::f64::consts::SQRT_2) - 2.0 * (-0.5 * g4 * g4).exp() / SQRT_2PI
}

/// Saddle objective `xi(alpha, sigma; c1z, gamma)`.
pub fn xi_rd1(alpha: f64, sigma: f64, c1z: f64, gamma: f64) -> Result<f64> {
    if !(alpha > 0.0 && sigma > 0.0) {
        return Err(ClupError::InvalidArgument(format!(
            "alpha and sigma must be positive, got alpha={alpha}, sigma={sigma}"
        )));
    }
    if !(0.0..=4.0).contains(&c1z) {
        return Err(ClupError::InvalidArgument(format!("c1z must lie in [0, 4], got {c1z}")));
    }
    check_gamma(gamma)?;
    Ok(xi_unchecked(alpha, sigma * sigma, c1z, gamma))
}

fn xi_unchecked(alpha: f64, sigma_sq: f64, c1z: f64, gamma: f64) -> f64 {
    alpha.sqrt() * (c1z + sigma_sq).sqrt() + i11(gamma) + i21(gamma) - gamma * c1z
}

/// Moments of the per-coordinate relaxation error at a given `gamma`:
/// `(sqrt(n) E z_i, n E z_i²)`.
pub fn error_moments(gamma: f64) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    let g4 = 4.0 * gamma;
    let s_x1 = (1.0 - (-g4 * g4 / 2.0).exp()) / (2.0 * gamma * SQRT_2PI);
    let s_xsq1 = -i11(gamma) / gamma;
    let s_x2 = libm::erfc(g4 / std::f64::consts::SQRT_2);
    let s_xsq2 = 2.0 * s_x2;
    Ok((s_x1 + s_x2, s_xsq1 + s_xsq2))
}

/// Probability that a relaxed coordinate lands on the wrong side of zero,
/// `P(sqrt(n) z_i > 1) = P(h < −2 gamma)`.
pub fn first_iteration_error(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    // 1 − ½ erfc(−√2 γ) written without the cancellation.
    Ok(0.5 * libm::erfc(std::f64::consts::SQRT_2 * gamma))
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`; only interior
/// points are evaluated.
pub fn golden_section_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // Tolerance is absolute near zero and relative for large arguments.
    while (b - a) > tol * (1.0 + a.abs().max(b.abs())) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        if x1 >= x2 {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `max_gamma xi(c1z, gamma)`: returns `(gamma, value)`.
fn max_over_gamma(alpha: f64, sigma_sq: f64, c1z: f64) -> Result<(f64, f64)> {
    let f = |g: f64| xi_unchecked(alpha, sigma_sq, c1z, g);
    // The profile is concave in gamma; grow the window until it turns down.
    let mut hi = GAMMA_SEARCH_MAX;
    let mut expansions = 0;
    while f(hi) >= f(0.5 * hi) {
        hi *= 2.0;
        expansions += 1;
        if expansions > GAMMA_EXPANSIONS {
            return Err(ClupError::Bracketing(format!(
                "xi still increasing at gamma = {hi:.3e} for c1z = {c1z:.3e}"
            )));
        }
    }
    let (g, neg) = golden_section_min(|g| -f(g), 0.0, hi, ARG_TOL);
    Ok((g, -neg))
}

/// Solves `min_{0 <= c <= 4} max_gamma xi` and derives the first-iteration
/// statistics.
pub fn solve_first_iteration(alpha: f64, sigma: f64) -> Result<TheoryFirstIter> {
    if !(alpha > 0.0 && alpha.is_finite() && sigma > 0.0 && sigma.is_finite()) {
        return Err(ClupError::InvalidArgument(format!(
            "alpha and sigma must be positive, got alpha={alpha}, sigma={sigma}"
        )));
    }
    let sigma_sq = sigma * sigma;

    // The outer search runs over u = sqrt(c) so that optima near c = 0 (high
    // SNR) are resolved to relative rather than absolute precision.
    let mut failure = None;
    let (u_hat, _) = golden_section_min(
        |u| match max_over_gamma(alpha, sigma_sq, u * u) {
            Ok((_, v)) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        0.0,
        2.0,
        ARG_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let c1z_hat = u_hat * u_hat;
    let (gamma_hat, xi) = max_over_gamma(alpha, sigma_sq, c1z_hat)?;
    if gamma_hat < GAMMA_BOUNDARY {
        return Err(ClupError::Bracketing(format!(
            "no interior maximizer in gamma at c1z = {c1z_hat:.6} (gamma -> {gamma_hat:.3e}, xi = {xi:.6})"
        )));
    }

    let (e_z, e_zsq) = error_moments(gamma_hat)?;
    let d1_pred = 1.0 - e_z;
    let d2_pred = e_zsq + 2.0 * d1_pred - 1.0;
    Ok(TheoryFirstIter {
        alpha,
        sigma,
        gamma_hat,
        c1z_hat,
        xi,
        nu_hat: 0.0,
        s1_hat: 0.0,
        p_err1: first_iteration_error(gamma_hat)?,
        e_z,
        e_zsq,
        d1_pred,
        d2_pred,
    })
}

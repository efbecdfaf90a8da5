//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{ClupError, Result};

const POWER_REL_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 200;
const POWER_INFLATION: f64 = 1.01;

/// Upper estimate of `sigma_max(A)^2`, used as the Lipschitz constant of
/// `x -> A^T A x`.
///
/// Power iteration on `A^T A` until the Rayleigh quotient changes by less than
/// `1e-6` relative (or 200 sweeps), inflated by 1%.
pub fn spectral_norm_sq(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 || a.iter().all(|&x| x == 0.0) {
        return Err(ClupError::ZeroMatrix);
    }
    // Fixed, non-symmetric start so the iteration is reproducible and does not
    // start orthogonal to a coordinate-aligned top eigenvector.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * (i as f64 * 0.7).sin());
    v.normalize_mut();
    let mut av = DVector::zeros(a.nrows());
    let mut w = DVector::zeros(n);
    let mut estimate = 0.0f64;
    for _ in 0..POWER_MAX_ITERS {
        av.gemv(1.0, a, &v, 0.0);
        w.gemv_tr(1.0, a, &av, 0.0);
        let rayleigh = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            // v landed in the null space; any direction with A v != 0 will do.
            return Err(ClupError::ZeroMatrix);
        }
        v.copy_from(&w);
        v /= norm;
        let done = (rayleigh - estimate).abs() <= POWER_REL_TOL * rayleigh;
        estimate = rayleigh;
        if done {
            break;
        }
    }
    Ok(estimate * POWER_INFLATION)
}

/// Clamps every coordinate into `[-bound, bound]`.
pub fn project_box(x: &mut DVector<f64>, bound: f64) {
    x.apply(|xi| *xi = xi.clamp(-bound, bound));
}

/// Max-norm of the unit-step projected-gradient map `x - P(x - g)`.
///
/// Zero exactly at KKT points of `min f` over the box when `g = grad f(x)`:
/// free coordinates need `g_i = 0`, coordinates on a face need `g_i` to push
/// outward.
pub fn kkt_residual(x: &DVector<f64>, grad: &DVector<f64>, bound: f64) -> f64 {
    x.iter()
        .zip(grad.iter())
        .map(|(&xi, &gi)| (xi - (xi - gi).clamp(-bound, bound)).abs())
        .fold(0.0, f64::max)
}

/// `‖y − A x‖₂`.
pub fn residual_norm(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let mut r = y.clone();
    r.gemv(-1.0, a, x, 1.0);
    r.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        let l = spectral_norm_sq(&DMatrix::identity(3, 3)).unwrap();
        assert!((1.0..=1.01).contains(&l), "{l}");
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let l = spectral_norm_sq(&d).unwrap();
        assert!((9.0..=9.09).contains(&l), "{l}");
    }

    #[test]
    fn zero_matrix_rejected() {
        assert!(matches!(
            spectral_norm_sq(&DMatrix::zeros(3, 2)),
            Err(ClupError::ZeroMatrix)
        ));
    }

    #[test]
    fn kkt_map_sign_conventions() {
        let b = 0.5;
        let x = DVector::from_vec(vec![0.5, -0.5, 0.1]);
        // Upper face pushed outward, lower face pushed outward, free with zero gradient.
        let g = DVector::from_vec(vec![-3.0, 2.0, 0.0]);
        assert_eq!(kkt_residual(&x, &g, b), 0.0);
        // Upper face with an inward-pointing gradient is not optimal.
        let g = DVector::from_vec(vec![0.25, 0.0, 0.0]);
        assert!((kkt_residual(&x, &g, b) - 0.25).abs() < 1e-15);
    }
}

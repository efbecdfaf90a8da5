//! Brute-force reference solvers for tiny instances.
//!
//! Both work by enumerating all `3ⁿ` face patterns of the box (each coordinate
//! free, at `−b` or at `+b`) and share no code with [`crate::convex`]. Only
//! usable for `n <= MAX_DIM`.
//!
//! * Box least squares: every pattern fixes the bound coordinates and solves
//!   the unconstrained least squares on the free ones; the best feasible
//!   candidate is optimal.
//! * CLuP step: the optimum equals `max_{λ >= 0} g(λ)` with
//!   `g(λ) = min_box −cᵀx + λ(‖y − Ax‖² − r²)` (strong duality, Slater holds
//!   whenever the ball has interior in the box). `g` is concave; it is scanned
//!   by golden section on `ln λ`, each inner box QP solved by enumeration.

use nalgebra::{DMatrix, DVector};

use crate::error::{ClupError, Result};
use crate::theory::golden_section_min;

pub const MAX_DIM: usize = 12;

/// Relative slack allowed when testing a candidate against the box.
const FEAS_TOL: f64 = 1e-12;
const LN_LAMBDA_MIN: f64 = -30.0;
const LN_LAMBDA_MAX: f64 = 30.0;
const SCAN_TOL: f64 = 1e-10;

/// Exact minimizer of `½ xᵀHx − fᵀx` over `[−b, b]ⁿ` for positive
/// semidefinite `H`, with the attained value.
///
/// Patterns whose free block is singular are skipped; for a generic `f` the
/// minimum is attained at a pattern whose free block is nonsingular.
pub fn box_qp(h: &DMatrix<f64>, f: &DVector<f64>, bound: f64) -> Result<(DVector<f64>, f64)> {
    let n = h.nrows();
    if n == 0 || n > MAX_DIM || h.ncols() != n || f.len() != n {
        return Err(ClupError::Dimension(format!(
            "box_qp needs square H with 1 <= n <= {MAX_DIM} matching f, got {}x{} and {}",
            h.nrows(),
            h.ncols(),
            f.len()
        )));
    }
    let value = |x: &DVector<f64>| 0.5 * x.dot(&(h * x)) - f.dot(x);
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut pattern = vec![0u8; n];
    for code in 0..3usize.pow(n as u32) {
        let mut rest = code;
        for p in pattern.iter_mut() {
            *p = (rest % 3) as u8;
            rest /= 3;
        }
        let Some(x) = candidate(h, f, bound, &pattern) else {
            continue;
        };
        let v = value(&x);
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((x, v));
        }
    }
    best.ok_or(ClupError::Empty("box_qp found no feasible face pattern"))
}

/// Pattern digit 0 = free, 1 = lower face, 2 = upper face.
fn candidate(h: &DMatrix<f64>, f: &DVector<f64>, bound: f64, pattern: &[u8]) -> Option<DVector<f64>> {
    let n = pattern.len();
    let mut x = DVector::from_iterator(
        n,
        pattern.iter().map(|&p| match p {
            1 => -bound,
            2 => bound,
            _ => 0.0,
        }),
    );
    let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
    if free.is_empty() {
        return Some(x);
    }
    let k = free.len();
    let hff = DMatrix::from_fn(k, k, |i, j| h[(free[i], free[j])]);
    // Right side f_F − H_{F,:} x, with x zero on F.
    let hx = h * &x;
    let rhs = DVector::from_fn(k, |i, _| f[free[i]] - hx[free[i]]);
    let xf = hff.cholesky()?.solve(&rhs);
    for (i, &j) in free.iter().enumerate() {
        let v = xf[i];
        if !v.is_finite() || v.abs() > bound * (1.0 + FEAS_TOL) {
            return None;
        }
        x[j] = v.clamp(-bound, bound);
    }
    Some(x)
}

/// Box least squares `min ½‖y − Ax‖²` over `[−b, b]ⁿ`: `(x, objective)`.
pub fn box_ls(a: &DMatrix<f64>, y: &DVector<f64>, bound: f64) -> Result<(DVector<f64>, f64)> {
    check_system(a, y, bound)?;
    let h = a.tr_mul(a);
    let f = a.tr_mul(y);
    let (x, _) = box_qp(&h, &f, bound)?;
    let obj = 0.5 * (y - a * &x).norm_squared();
    Ok((x, obj))
}

/// Optimal value of `min −cᵀx` over `{‖y − Ax‖ <= r} ∩ [−b, b]ⁿ`.
pub fn clup_step_value(a: &DMatrix<f64>, y: &DVector<f64>, c: &DVector<f64>, radius: f64, bound: f64) -> Result<f64> {
    check_system(a, y, bound)?;
    if c.len() != a.ncols() {
        return Err(ClupError::Dimension(format!("c has length {}, expected {}", c.len(), a.ncols())));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(ClupError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let (_, ls) = box_ls(a, y, bound)?;
    let min_residual = (2.0 * ls).sqrt();
    if min_residual > radius {
        return Err(ClupError::Infeasible { radius, min_residual });
    }

    let h0 = a.tr_mul(a);
    let aty = a.tr_mul(y);
    let yty = y.norm_squared();
    let r2 = radius * radius;
    let mut failure = None;
    // g(λ) = min_x −cᵀx + λ(xᵀAᵀAx − 2yᵀAx + yᵀy − r²).
    let mut dual = |lambda: f64| -> f64 {
        let h = &h0 * (2.0 * lambda);
        let f = c + &aty * (2.0 * lambda);
        match box_qp(&h, &f, bound) {
            Ok((_, v)) => v + lambda * (yty - r2),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    };
    let at_zero = dual(0.0);
    let (_, neg) = golden_section_min(|t| -dual(t.exp()), LN_LAMBDA_MIN, LN_LAMBDA_MAX, SCAN_TOL);
    if let Some(e) = failure {
        return Err(e);
    }
    // Weak duality makes every g(λ) a lower bound; take the best one seen.
    Ok(at_zero.max(-neg))
}

fn check_system(a: &DMatrix<f64>, y: &DVector<f64>, bound: f64) -> Result<()> {
    if a.ncols() == 0 || a.ncols() > MAX_DIM {
        return Err(ClupError::Dimension(format!("oracle needs 1 <= n <= {MAX_DIM}, got {}", a.ncols())));
    }
    if a.nrows() != y.len() {
        return Err(ClupError::Dimension(format!("A has {} rows but y has length {}", a.nrows(), y.len())));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(ClupError::InvalidArgument(format!("bound must be positive, got {bound}")));
    }
    Ok(())
}

//! The two convex programs solved inside every CLuP iteration.
//!
//! Both reduce to minimizing a box-constrained quadratic
//!
//! ```text
//!     q(x) = -c^T x + (w/2) ‖A x − y‖²      subject to  |x_i| ≤ 1/sqrt(n)
//! ```
//!
//! * box-constrained least squares (polytope relaxation): `c = 0`, `w = 1`;
//! * the Lagrangian of the CLuP step for a fixed multiplier `lambda` on the
//!   squared-ball constraint: `w = 2 lambda`.
//!
//! The quadratic is minimized by accelerated projected gradient (FISTA with
//! gradient-based restart) with step `1/(w L)`, `L >= sigma_max(A)^2`. The CLuP
//! step wraps it in a bracketed search on `lambda`: the inner residual is
//! nonincreasing in `lambda`, and the search stops once it matches the radius
//! to `radius_tol`.

use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector};

use crate::error::{ClupError, Result};
use crate::linalg::{kkt_residual, spectral_norm_sq};

/// Iterations between optimality checks in the inner solver.
const CHECK_EVERY: usize = 8;
/// Largest multiplier tried before the ball is declared unreachable.
const LAMBDA_CEILING: f64 = 1e14;
/// Smallest multiplier tried when searching for the lower end of the bracket.
const LAMBDA_FLOOR: f64 = 1e-14;
/// Multiplicative step of the bracket search on the multiplier, from the
/// default start and from a caller's hint.
const BRACKET_FACTOR: f64 = 8.0;
const HINTED_BRACKET_FACTOR: f64 = 2.0;
/// Probes whose residual is within this fraction of the radius try the
/// exact face solve before the search continues.
const POLISH_WINDOW: f64 = 1e-3;
/// Smallest radius, relative to `‖y‖ + ‖A‖₂`, for which a CLuP step can be
/// certified.
const RESOLVABLE_RADIUS: f64 = 1e-10;
/// Multiple of the rounding error of `2 lambda Aᵀ(Ax − y)` below which a
/// gradient component is treated as zero.
const ROUNDOFF_MARGIN: f64 = 64.0;
/// Cap on active-set moves in one polish attempt.
const FACE_ROUNDS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Projected-gradient fixed-point tolerance, relative to the gradient scale.
    pub grad_tol: f64,
    /// Relative tolerance on the active norm constraint.
    pub radius_tol: f64,
    pub max_inner_iters: usize,
    pub max_bisect_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            radius_tol: 1e-6,
            max_inner_iters: 20_000,
            max_bisect_iters: 200,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.radius_tol > 0.0) {
            return Err(ClupError::InvalidArgument(
                "solver tolerances must be strictly positive".into(),
            ));
        }
        if self.max_inner_iters == 0 || self.max_bisect_iters == 0 {
            return Err(ClupError::InvalidArgument(
                "solver iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolverStatus {
    Converged,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub x: DVector<f64>,
    /// `‖y − A x‖₂` for box least squares, `−cᵀx` for the CLuP step.
    pub objective: f64,
    pub residual_norm: f64,
    pub status: SolverStatus,
    pub kkt_residual: f64,
    /// Multiplier of the squared-ball constraint (0 when the ball is inactive
    /// and for box least squares).
    pub multiplier: f64,
    /// Projected-gradient iterations spent, summed over all inner solves.
    pub inner_iterations: usize,
}

/// One inner solve of the multiplier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualProbe {
    pub lambda: f64,
    pub residual_norm: f64,
}

/// A linear system `(A, y)` with the per-matrix quantities the solvers reuse
/// across calls.
#[derive(Debug, Clone)]
pub struct PreparedSystem<'a> {
    a: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    bound: f64,
    lipschitz: f64,
    aty_max: f64,
    /// `AᵀA`, built on the first polish.
    gram: OnceCell<DMatrix<f64>>,
}

struct InnerSolution {
    x: DVector<f64>,
    residual_norm: f64,
    kkt: f64,
    iterations: usize,
    converged: bool,
}

impl<'a> PreparedSystem<'a> {
    pub fn new(a: &'a DMatrix<f64>, y: &'a DVector<f64>) -> Result<Self> {
        if a.nrows() != y.len() {
            return Err(ClupError::Dimension(format!(
                "A has {} rows but y has length {}",
                a.nrows(),
                y.len()
            )));
        }
        let lipschitz = spectral_norm_sq(a)?;
        let aty_max = (a.transpose() * y).amax();
        Ok(Self {
            a,
            y,
            bound: 1.0 / (a.ncols() as f64).sqrt(),
            lipschitz,
            aty_max,
            gram: OnceCell::new(),
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `argmin ½‖y − A x‖²` over the hypercube.
    pub fn box_ls(&self, settings: &SolverSettings) -> Result<SubproblemResult> {
        settings.validate()?;
        let n = self.a.ncols();
        let tol = settings.grad_tol * (1.0 + self.aty_max);
        let mut sol = self.minimize(None, 1.0, DVector::zeros(n), tol, settings.max_inner_iters);
        if sol.converged {
            self.polish_box_ls(&mut sol);
        }
        Ok(SubproblemResult {
            objective: sol.residual_norm,
            residual_norm: sol.residual_norm,
            status: status_of(sol.converged),
            kkt_residual: sol.kkt,
            multiplier: 0.0,
            inner_iterations: sol.iterations,
            x: sol.x,
        })
    }

    /// `argmin −cᵀx` subject to `‖y − A x‖₂ ≤ r` and the hypercube.
    pub fn clup_step(
        &self,
        c: &DVector<f64>,
        r: f64,
        settings: &SolverSettings,
    ) -> Result<SubproblemResult> {
        self.clup_step_traced(c, r, settings).map(|(res, _)| res)
    }

    /// As [`Self::clup_step`], also returning every multiplier probe in the
    /// order it was evaluated.
    pub fn clup_step_traced(
        &self,
        c: &DVector<f64>,
        r: f64,
        settings: &SolverSettings,
    ) -> Result<(SubproblemResult, Vec<DualProbe>)> {
        self.clup_step_with_hint(c, r, settings, None)
    }

    /// CLuP step whose multiplier search starts from `lambda_hint` (typically
    /// the previous iteration's multiplier) instead of 1.
    pub fn clup_step_with_hint(
        &self,
        c: &DVector<f64>,
        r: f64,
        settings: &SolverSettings,
        lambda_hint: Option<f64>,
    ) -> Result<(SubproblemResult, Vec<DualProbe>)> {
        settings.validate()?;
        let n = self.a.ncols();
        if c.len() != n {
            return Err(ClupError::Dimension(format!(
                "objective has length {} but A has {n} columns",
                c.len()
            )));
        }
        if c.iter().all(|&ci| ci == 0.0) {
            return Err(ClupError::InvalidArgument("objective vector is zero".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(ClupError::InvalidArgument(format!("radius must be positive, got {r}")));
        }

        let bound = self.bound;
        let corner = c.map(|ci| if ci >= 0.0 { bound } else { -bound });
        let corner_residual = self.residual(&corner);
        if corner_residual <= r {
            let kkt = kkt_residual(&corner, &(-c), bound);
            return Ok((
                SubproblemResult {
                    objective: -c.dot(&corner),
                    residual_norm: corner_residual,
                    status: SolverStatus::Converged,
                    kkt_residual: kkt,
                    multiplier: 0.0,
                    inner_iterations: 0,
                    x: corner,
                },
                Vec::new(),
            ));
        }

        let mut search = DualSearch {
            sys: self,
            c,
            r,
            settings,
            c_max: c.amax(),
            warm: corner,
            probes: Vec::new(),
            iterations: 0,
            all_converged: true,
            bracket_factor: BRACKET_FACTOR,
        };
        let hint = lambda_hint.filter(|l| l.is_finite() && *l > 0.0);
        if hint.is_some() {
            search.bracket_factor = HINTED_BRACKET_FACTOR;
        }
        let mut result = search.run(hint.unwrap_or(1.0))?;
        // Below this scale the residual cannot be resolved to `radius_tol`
        // in double precision, so no certificate is meaningful.
        if r < RESOLVABLE_RADIUS * (self.y.norm() + self.lipschitz.sqrt()) {
            result.status = SolverStatus::IterLimit;
        }
        Ok((result, search.probes))
    }

    /// `(A_F)ᵀ A_F` for the columns in `free`.
    fn gram_block(&self, free: &[usize]) -> DMatrix<f64> {
        let g = self.gram.get_or_init(|| self.a.tr_mul(self.a));
        DMatrix::from_fn(free.len(), free.len(), |i, j| g[(free[i], free[j])])
    }

    /// Newton step on the face identified by an approximate solution: solves
    /// the normal equations on the free coordinates exactly. Kept only if it
    /// stays in the box and does not worsen the KKT residual.
    fn polish_box_ls(&self, sol: &mut InnerSolution) {
        let a = self.a;
        let bound = self.bound;
        let grad = a.tr_mul(&(a * &sol.x - self.y));
        let (mut candidate, free) = pin_faces(&sol.x, &grad, bound);
        if free.len() > a.nrows() {
            return;
        }
        if !free.is_empty() {
            let Some(chol) = self.gram_block(&free).cholesky() else {
                return;
            };
            let rhs = a.tr_mul(&(self.y - a * &candidate));
            let x_free = chol.solve(&DVector::from_fn(free.len(), |k, _| rhs[free[k]]));
            if x_free.iter().any(|v| v.abs() > bound) {
                return;
            }
            for (&i, &v) in free.iter().zip(x_free.iter()) {
                candidate[i] = v;
            }
        }
        let residual = a * &candidate - self.y;
        let kkt = kkt_residual(&candidate, &a.tr_mul(&residual), bound);
        if kkt <= sol.kkt {
            sol.residual_norm = residual.norm();
            sol.kkt = kkt;
            sol.x = candidate;
        }
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        let mut res = self.y.clone();
        res.gemv(-1.0, self.a, x, 1.0);
        res.norm()
    }

    /// FISTA with gradient restart on `−cᵀx + (w/2)‖Ax − y‖²` over the box.
    fn minimize(
        &self,
        c: Option<&DVector<f64>>,
        weight: f64,
        x0: DVector<f64>,
        tol: f64,
        max_iters: usize,
    ) -> InnerSolution {
        let a = self.a;
        let y = self.y;
        let bound = self.bound;
        let step = 1.0 / (weight * self.lipschitz);
        let m = a.nrows();
        let n = a.ncols();

        let gradient_at = |ax: &DVector<f64>, out: &mut DVector<f64>, scratch: &mut DVector<f64>| {
            scratch.copy_from(ax);
            *scratch -= y;
            out.gemv_tr(weight, a, scratch, 0.0);
            if let Some(c) = c {
                *out -= c;
            }
        };

        let mut x = x0;
        crate::linalg::project_box(&mut x, bound);
        let mut ax = DVector::zeros(m);
        ax.gemv(1.0, a, &x, 0.0);
        let mut grad = DVector::zeros(n);
        let mut scratch = DVector::zeros(m);

        gradient_at(&ax, &mut grad, &mut scratch);
        let mut kkt = kkt_residual(&x, &grad, bound);
        if kkt <= tol {
            return finish(x, &ax, y, kkt, 0, true);
        }

        let mut z = x.clone();
        let mut az = ax.clone();
        let mut x_new = DVector::zeros(n);
        let mut ax_new = DVector::zeros(m);
        let mut t = 1.0f64;

        for it in 1..=max_iters {
            gradient_at(&az, &mut grad, &mut scratch);
            x_new.zip_zip_apply(&z, &grad, |xn, zi, gi| {
                *xn = (zi - step * gi).clamp(-bound, bound);
            });
            ax_new.gemv(1.0, a, &x_new, 0.0);

            if it % CHECK_EVERY == 0 || it == max_iters {
                gradient_at(&ax_new, &mut grad, &mut scratch);
                kkt = kkt_residual(&x_new, &grad, bound);
                if kkt <= tol {
                    return finish(x_new, &ax_new, y, kkt, it, true);
                }
            }

            // Restart when the momentum direction opposes the last step.
            let mut restart = 0.0;
            for i in 0..n {
                restart += (z[i] - x_new[i]) * (x_new[i] - x[i]);
            }
            if restart > 0.0 {
                t = 1.0;
                z.copy_from(&x_new);
                az.copy_from(&ax_new);
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                z.zip_zip_apply(&x_new, &x, |zi, xn, xo| *zi = xn + beta * (xn - xo));
                az.zip_zip_apply(&ax_new, &ax, |zi, xn, xo| *zi = xn + beta * (xn - xo));
                t = t_next;
            }
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut ax, &mut ax_new);
        }
        finish(x, &ax, y, kkt, max_iters, false)
    }
}

/// Pins coordinates that sit (within `1e-6` relative) on a face the gradient
/// pushes against and zeroes the rest, which are returned as the free set.
fn pin_faces(x: &DVector<f64>, grad: &DVector<f64>, bound: f64) -> (DVector<f64>, Vec<usize>) {
    let near = 1e-6 * bound;
    let mut pinned = x.clone();
    let mut free = Vec::new();
    for i in 0..x.len() {
        if x[i] >= bound - near && grad[i] <= 0.0 {
            pinned[i] = bound;
        } else if x[i] <= -bound + near && grad[i] >= 0.0 {
            pinned[i] = -bound;
        } else {
            pinned[i] = 0.0;
            free.push(i);
        }
    }
    (pinned, free)
}

fn finish(
    x: DVector<f64>,
    ax: &DVector<f64>,
    y: &DVector<f64>,
    kkt: f64,
    iterations: usize,
    converged: bool,
) -> InnerSolution {
    let residual_norm = (ax - y).norm();
    InnerSolution {
        x,
        residual_norm,
        kkt,
        iterations,
        converged,
    }
}

fn status_of(converged: bool) -> SolverStatus {
    if converged {
        SolverStatus::Converged
    } else {
        SolverStatus::IterLimit
    }
}

/// State of the multiplier search for one CLuP step.
struct DualSearch<'s, 'a> {
    sys: &'s PreparedSystem<'a>,
    c: &'s DVector<f64>,
    r: f64,
    settings: &'s SolverSettings,
    c_max: f64,
    warm: DVector<f64>,
    probes: Vec<DualProbe>,
    iterations: usize,
    all_converged: bool,
    bracket_factor: f64,
}

struct Probe {
    lambda: f64,
    /// `residual − r`; nonincreasing in `lambda`.
    gap: f64,
    sol: InnerSolution,
}

enum Step {
    Done(SubproblemResult),
    Continue(Probe),
}

impl DualSearch<'_, '_> {
    fn budget_left(&self) -> bool {
        self.probes.len() < self.settings.max_bisect_iters
    }

    /// Inner KKT tolerance at multiplier `lambda`.
    fn inner_tol(&self, lambda: f64) -> f64 {
        self.settings.grad_tol * (self.c_max + 2.0 * lambda * (1.0 + self.sys.aty_max))
    }

    fn probe(&mut self, lambda: f64) -> Step {
        let sys = self.sys;
        let weight = 2.0 * lambda;
        let tol = self.inner_tol(lambda);
        let sol = sys.minimize(
            Some(self.c),
            weight,
            self.warm.clone(),
            tol,
            self.settings.max_inner_iters,
        );
        self.iterations += sol.iterations;
        self.all_converged &= sol.converged;
        self.warm.copy_from(&sol.x);
        self.probes.push(DualProbe {
            lambda,
            residual_norm: sol.residual_norm,
        });
        let gap = sol.residual_norm - self.r;
        if gap.abs() <= self.settings.radius_tol * self.r {
            Step::Done(self.result(lambda, sol, self.all_converged))
        } else if let Some((lambda, exact)) = (gap.abs() <= POLISH_WINDOW * self.r)
            .then(|| self.polish(&sol, lambda))
            .flatten()
        {
            Step::Done(self.finished(lambda, exact, true))
        } else {
            Step::Continue(Probe { lambda, gap, sol })
        }
    }

    /// Exact solution with the ball active, found by a primal active-set
    /// walk that starts on the face of `sol`.
    ///
    /// With the pinned coordinates fixed, stationarity gives
    /// `x_F = u + t w`, `t = 1/(2 lambda)`, where `u` is the least-squares fit
    /// of the free block and `w = (A_FᵀA_F)⁻¹ c_F`. The residual is
    /// `e − t A_F w` with `e ⟂ range(A_F)`, so `‖y − Ax‖ = r` fixes `t` in
    /// closed form. The walk moves toward that point until a free coordinate
    /// hits the box (which is then pinned), frees one pinned coordinate whose
    /// gradient points inward once the face point is inside the box, and
    /// slides along the null space of `A_F` while there are more free
    /// coordinates than rows. Each move lowers `−cᵀx` at a feasible point.
    /// Accepted only when the KKT map meets the inner tolerance, which
    /// certifies optimality.
    fn polish(&self, sol: &InnerSolution, lambda: f64) -> Option<(f64, InnerSolution)> {
        let sys = self.sys;
        let (a, bound) = (sys.a, sys.bound);
        let mut grad = a.tr_mul(&(a * &sol.x - sys.y)) * (2.0 * lambda);
        grad -= self.c;
        let (pinned, mut free) = pin_faces(&sol.x, &grad, bound);
        let mut x = sol.x.clone();
        let mut is_free = vec![false; x.len()];
        for &i in &free {
            is_free[i] = true;
        }
        for i in 0..x.len() {
            if !is_free[i] {
                x[i] = pinned[i];
            }
        }

        for _ in 0..FACE_ROUNDS {
            if free.len() > a.nrows() {
                let blocking = self.null_space_slide(&mut x, &free)?;
                free.retain(|&i| i != blocking);
                continue;
            }
            let (lambda, target) = self.face_point(&x, &free)?;
            // Ratio test along the segment from x to the face point.
            let mut step = 1.0;
            let mut blocking = None;
            for (&i, &v) in free.iter().zip(target.iter()) {
                if v.abs() > bound {
                    let limit = (bound.copysign(v) - x[i]) / (v - x[i]);
                    if limit < step {
                        step = limit.max(0.0);
                        blocking = Some(i);
                    }
                }
            }
            for (&i, &v) in free.iter().zip(target.iter()) {
                x[i] += step * (v - x[i]);
            }
            if let Some(i) = blocking {
                x[i] = bound.copysign(x[i]);
                free.retain(|&j| j != i);
                continue;
            }

            let residual = a * &x - sys.y;
            let mut grad = a.tr_mul(&residual) * (2.0 * lambda);
            grad -= self.c;
            let significant = self.settings.grad_tol * self.c_max
                + ROUNDOFF_MARGIN * f64::EPSILON * 2.0 * lambda * (1.0 + sys.aty_max + sys.lipschitz);
            let inward = (0..x.len())
                .filter(|&i| !free.contains(&i) && x[i] * grad[i] > 0.0 && grad[i].abs() > significant)
                .max_by(|&i, &j| grad[i].abs().total_cmp(&grad[j].abs()));
            if let Some(i) = inward {
                let at = free.partition_point(|&j| j < i);
                free.insert(at, i);
                continue;
            }
            let kkt = kkt_residual(&x, &grad, bound);
            if kkt > self.inner_tol(lambda) {
                return None;
            }
            let sol = InnerSolution {
                x,
                residual_norm: residual.norm(),
                kkt,
                iterations: 0,
                converged: true,
            };
            return Some((lambda, sol));
        }
        None
    }

    /// Moves the free block along the component of `c_F` in the null space
    /// of `A_F`, which leaves `Ax` unchanged and does not lower `cᵀx`, until
    /// a free coordinate reaches the box. When `c_F` has no such component the
    /// objective is flat there and any null direction serves. Returns the
    /// coordinate that reached the box, now pinned.
    fn null_space_slide(&self, x: &mut DVector<f64>, free: &[usize]) -> Option<usize> {
        let sys = self.sys;
        let bound = sys.bound;
        let a_free = DMatrix::from_fn(sys.a.nrows(), free.len(), |r, k| sys.a[(r, free[k])]);
        let svd = a_free.svd(false, true);
        let v_t = svd.v_t?;
        let cutoff = 1e-12 * svd.singular_values.max();
        let null_part = |mut v: DVector<f64>| {
            for (row, &sv) in svd.singular_values.iter().enumerate() {
                if sv > cutoff {
                    let basis = v_t.row(row).transpose();
                    v.axpy(-basis.dot(&v), &basis, 1.0);
                }
            }
            v
        };
        let c_free = DVector::from_fn(free.len(), |k, _| self.c[free[k]]);
        let mut d = null_part(c_free.clone());
        if d.amax() <= 1e-12 * c_free.amax() {
            d = (0..free.len())
                .map(|k| null_part(DVector::from_fn(free.len(), |j, _| if j == k { 1.0 } else { 0.0 })))
                .max_by(|p, q| p.norm().total_cmp(&q.norm()))?;
            if d.amax() <= 1e-12 {
                return None;
            }
        }
        let (mut step, mut blocking) = (f64::INFINITY, None);
        for (k, &i) in free.iter().enumerate() {
            if d[k] != 0.0 {
                let limit = ((bound.copysign(d[k]) - x[i]) / d[k]).max(0.0);
                if limit < step {
                    step = limit;
                    blocking = Some(i);
                }
            }
        }
        let blocking = blocking?;
        for (k, &i) in free.iter().enumerate() {
            x[i] = (x[i] + step * d[k]).clamp(-bound, bound);
        }
        x[blocking] = bound.copysign(x[blocking]);
        Some(blocking)
    }

    /// Stationary point of the face `free` (pinned values taken from `x`)
    /// on the sphere `‖y − Ax‖ = r`: the multiplier and the free block.
    fn face_point(&self, x: &DVector<f64>, free: &[usize]) -> Option<(f64, DVector<f64>)> {
        let sys = self.sys;
        let a = sys.a;
        if free.is_empty() || free.len() > a.nrows() {
            return None;
        }
        let chol = sys.gram_block(free).cholesky()?;
        let mut pinned = x.clone();
        for &i in free {
            pinned[i] = 0.0;
        }
        let base = sys.y - a * &pinned;
        let atb = a.tr_mul(&base);
        let u = chol.solve(&DVector::from_fn(free.len(), |k, _| atb[free[k]]));
        let c_free = DVector::from_fn(free.len(), |k, _| self.c[free[k]]);
        let w = chol.solve(&c_free);
        // ‖A_F w‖² = wᵀ c_F.
        let curvature = w.dot(&c_free);
        for (k, &i) in free.iter().enumerate() {
            pinned[i] = u[k];
        }
        let slack = self.r * self.r - (sys.y - a * &pinned).norm_squared();
        if !(curvature > 0.0 && slack > 0.0) {
            return None;
        }
        let t = (slack / curvature).sqrt();
        Some((0.5 / t, u + w * t))
    }

    /// Final answer from `sol`, replaced by its polished version when that
    /// is certified.
    fn result(&self, lambda: f64, sol: InnerSolution, converged: bool) -> SubproblemResult {
        match self.polish(&sol, lambda) {
            Some((lambda, polished)) => self.finished(lambda, polished, true),
            None => self.finished(lambda, sol, converged),
        }
    }

    fn finished(&self, lambda: f64, sol: InnerSolution, converged: bool) -> SubproblemResult {
        SubproblemResult {
            objective: -self.c.dot(&sol.x),
            residual_norm: sol.residual_norm,
            status: status_of(converged),
            kkt_residual: sol.kkt,
            multiplier: lambda,
            inner_iterations: self.iterations,
            x: sol.x,
        }
    }

    fn run(&mut self, start: f64) -> Result<SubproblemResult> {
        // Bracket: gap(lo) > 0 > gap(hi), expanding geometrically from
        // the starting multiplier.
        let first = match self.probe(start) {
            Step::Done(res) => return Ok(res),
            Step::Continue(p) => p,
        };
        let (lo, hi) = if first.gap > 0.0 {
            let mut lo = first;
            loop {
                if lo.lambda >= LAMBDA_CEILING || !self.budget_left() {
                    return self.unreachable_ball(lo);
                }
                match self.probe(lo.lambda * self.bracket_factor) {
                    Step::Done(res) => return Ok(res),
                    Step::Continue(p) if p.gap > 0.0 => lo = p,
                    Step::Continue(p) => break (lo, p),
                }
            }
        } else {
            let mut hi = first;
            loop {
                if hi.lambda <= LAMBDA_FLOOR || !self.budget_left() {
                    return Ok(self.result(hi.lambda, hi.sol, false));
                }
                match self.probe(hi.lambda / self.bracket_factor) {
                    Step::Done(res) => return Ok(res),
                    Step::Continue(p) if p.gap < 0.0 => hi = p,
                    Step::Continue(p) => break (p, hi),
                }
            }
        };
        self.brent(lo, hi)
    }

    /// Brent's root finder on `t = ln(lambda)` inside a sign-changing bracket.
    /// The best feasible probe (gap < 0) is kept as the fallback answer.
    fn brent(&mut self, lo: Probe, hi: Probe) -> Result<SubproblemResult> {
        let mut a = lo.lambda.ln();
        let mut fa = lo.gap;
        let mut b = hi.lambda.ln();
        let mut fb = hi.gap;
        let mut feasible = hi;
        let mut c = a;
        let mut fc = fa;
        let mut d = b - a;
        let mut e = d;
        while self.budget_left() {
            if fc.abs() < fb.abs() {
                (a, b, c) = (b, c, b);
                (fa, fb, fc) = (fb, fc, fb);
            }
            let tol = 2.0 * f64::EPSILON * b.abs() + 0.5e-12;
            let xm = 0.5 * (c - b);
            if xm.abs() <= tol {
                break;
            }
            if e.abs() >= tol && fa.abs() > fb.abs() {
                let s = fb / fa;
                let (mut p, mut q);
                if a == c {
                    p = 2.0 * xm * s;
                    q = 1.0 - s;
                } else {
                    let qa = fa / fc;
                    let rb = fb / fc;
                    p = s * (2.0 * xm * qa * (qa - rb) - (b - a) * (rb - 1.0));
                    q = (qa - 1.0) * (rb - 1.0) * (s - 1.0);
                }
                if p > 0.0 {
                    q = -q;
                } else {
                    p = -p;
                }
                if 2.0 * p < (3.0 * xm * q - (tol * q).abs()).min((e * q).abs()) {
                    e = d;
                    d = p / q;
                } else {
                    d = xm;
                    e = d;
                }
            } else {
                d = xm;
                e = d;
            }
            a = b;
            fa = fb;
            b += if d.abs() > tol { d } else { tol.copysign(xm) };
            let probe = match self.probe(b.exp()) {
                Step::Done(res) => return Ok(res),
                Step::Continue(p) => p,
            };
            fb = probe.gap;
            if fb < 0.0 && fb > feasible.gap {
                feasible = probe;
            }
            if (fb > 0.0) == (fc > 0.0) {
                c = a;
                fc = fa;
                d = b - a;
                e = d;
            }
        }
        // Out of budget or bracket collapsed: the best feasible point is still
        // a valid (slightly suboptimal) answer.
        Ok(self.result(feasible.lambda, feasible.sol, false))
    }

    /// The residual stayed above `r` for every multiplier tried: the radius
    /// is below the relaxation optimum, sits on it, or is too small for the
    /// inner solver to resolve.
    fn unreachable_ball(&mut self, last: Probe) -> Result<SubproblemResult> {
        let ls = self.sys.box_ls(self.settings)?;
        self.iterations += ls.inner_iterations;
        if ls.residual_norm > self.r * (1.0 + self.settings.radius_tol) {
            return Err(ClupError::Infeasible {
                radius: self.r,
                min_residual: ls.residual_norm,
            });
        }
        if let Some((lambda, exact)) = self.polish(&last.sol, last.lambda) {
            return Ok(self.finished(lambda, exact, true));
        }
        // The relaxation optimum answers the step only when the radius sits
        // on it; strictly inside, the ball was reachable and the search failed.
        let on_optimum = ls.residual_norm >= self.r * (1.0 - self.settings.radius_tol);
        let converged = on_optimum && ls.status == SolverStatus::Converged;
        let sol = InnerSolution {
            residual_norm: ls.residual_norm,
            kkt: ls.kkt_residual,
            iterations: 0,
            converged,
            x: ls.x,
        };
        Ok(self.result(last.lambda, sol, converged))
    }
}

/// Box-constrained least squares `min ‖y − A x‖₂` over `[-1/sqrt(n), 1/sqrt(n)]^n`.
pub fn solve_box_ls(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &SolverSettings,
) -> Result<SubproblemResult> {
    PreparedSystem::new(a, y)?.box_ls(settings)
}

/// CLuP step `min −cᵀx` over `{‖y − A x‖₂ ≤ r} ∩ [-1/sqrt(n), 1/sqrt(n)]^n`.
pub fn solve_clup_step(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &DVector<f64>,
    r: f64,
    settings: &SolverSettings,
) -> Result<SubproblemResult> {
    PreparedSystem::new(a, y)?.clup_step(c, r, settings)
}

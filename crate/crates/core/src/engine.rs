//! Outer CLuP iterations.
//!
//! Each step solves
//!
//! ```text
//!     x^(k,s) = argmin −(x^(k−1))ᵀ x   s.t.  ‖y − A x‖₂ ≤ r,  x ∈ [−1/√n, 1/√n]^n
//!     x^(k)   = x^(k,s) / ‖x^(k,s)‖₂
//! ```
//!
//! with `r = r_sc · r_plt` and `r_plt` the residual of the box least-squares
//! relaxation of the same instance. The polytope-start variant uses the
//! relaxation solution itself as iterate 1; the random-start variant starts
//! from a uniformly random sign vector (iterate 0) and counts its first CLuP
//! step as iterate 1.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex::{PreparedSystem, SolverSettings, SolverStatus, SubproblemResult};
use crate::error::{ClupError, Result};
use crate::metrics::{record_iteration, IterationRecord};
use crate::model::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Variant {
    /// CLuP started from a random sign vector.
    #[serde(rename = "clup")]
    RandomStart,
    /// CLuP-plt: started from the polytope-relaxation solution.
    #[serde(rename = "clup-plt")]
    PolytopeStart,
}

impl Variant {
    /// Command-line / file label.
    pub fn label(self) -> &'static str {
        match self {
            Variant::RandomStart => "clup",
            Variant::PolytopeStart => "clup-plt",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "clup" => Some(Variant::RandomStart),
            "clup-plt" => Some(Variant::PolytopeStart),
            _ => None,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClupConfig {
    pub variant: Variant,
    /// Radius scale: `r = r_sc · r_plt`.
    pub r_sc: f64,
    pub max_iters: usize,
    /// Stop once consecutive `s_hat` differ by less than this; 0 disables.
    pub early_stop_tol: f64,
    pub solver: SolverSettings,
    /// Seed of the random starting point (random-start variant only).
    pub seed: u64,
}

impl ClupConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            r_sc: 1.3,
            max_iters: 5,
            early_stop_tol: 1e-4,
            solver: SolverSettings::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_sc > 0.0 && self.r_sc.is_finite()) {
            return Err(ClupError::InvalidArgument(format!("r_sc must be positive, got {}", self.r_sc)));
        }
        if self.max_iters == 0 {
            return Err(ClupError::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.early_stop_tol.is_nan() || self.early_stop_tol < 0.0 {
            return Err(ClupError::InvalidArgument("early_stop_tol must be nonnegative".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    /// 1-based iteration index; 0 marks the random starting point.
    pub k: usize,
    /// Un-normalized solution `x^(k,s)`.
    pub x_s: DVector<f64>,
    /// Normalized iterate `x^(k)`.
    pub x: DVector<f64>,
    /// Error vector `x_sol − x^(k,s)`.
    pub z: DVector<f64>,
    pub residual_norm: f64,
}

impl Iterate {
    fn new(k: usize, x_s: DVector<f64>, instance: &ProblemInstance, residual_norm: f64) -> Result<Self> {
        let norm = x_s.norm();
        if norm == 0.0 {
            return Err(ClupError::DegenerateIterate { k });
        }
        Ok(Self {
            k,
            x: &x_s / norm,
            z: &instance.x_sol - &x_s,
            x_s,
            residual_norm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Budget,
    EarlyStop,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub r_plt: f64,
    pub r: f64,
    /// Random starting point (random-start variant only).
    pub start: Option<Iterate>,
    pub iterates: Vec<Iterate>,
    pub records: Vec<IterationRecord>,
    /// Ball multiplier of each CLuP step (aligned with the iterates it produced).
    pub multipliers: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Polytope relaxation as iterate 1: `x^(1,s) = argmin ‖y − A x‖₂` over the box.
/// Its residual is `r_plt`.
pub fn init_polytope(instance: &ProblemInstance, cfg: &ClupConfig) -> Result<Iterate> {
    let sys = PreparedSystem::new(&instance.a, &instance.y)?;
    polytope_iterate(&sys, instance, &cfg.solver)
}

fn polytope_iterate(sys: &PreparedSystem<'_>, instance: &ProblemInstance, settings: &SolverSettings) -> Result<Iterate> {
    let ls = checked(sys.box_ls(settings)?, "box least squares")?;
    Iterate::new(1, ls.x, instance, ls.residual_norm)
}

/// Random starting point `x^(0)`, uniform over `{±1/√n}^n`, keyed by `cfg.seed`.
pub fn init_random(instance: &ProblemInstance, cfg: &ClupConfig) -> Iterate {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let b = instance.bound();
    let x0 = DVector::from_fn(instance.n, |_, _| if rng.random_bool(0.5) { b } else { -b });
    let residual_norm = crate::linalg::residual_norm(&instance.a, &instance.y, &x0);
    // ‖x0‖ = 1, so this cannot be degenerate.
    Iterate {
        k: 0,
        x: x0.clone(),
        z: &instance.x_sol - &x0,
        x_s: x0,
        residual_norm,
    }
}

fn checked(res: SubproblemResult, solver: &'static str) -> Result<SubproblemResult> {
    match res.status {
        SolverStatus::Converged => Ok(res),
        SolverStatus::IterLimit => Err(ClupError::IterLimit {
            solver,
            kkt_residual: res.kkt_residual,
        }),
    }
}

/// Runs the configured variant for up to `cfg.max_iters` recorded iterates.
pub fn run(instance: &ProblemInstance, cfg: &ClupConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let sys = PreparedSystem::new(&instance.a, &instance.y)?;

    let relaxation = polytope_iterate(&sys, instance, &cfg.solver)?;
    let r_plt = relaxation.residual_norm;
    let r = cfg.r_sc * r_plt;

    let mut iterates = Vec::with_capacity(cfg.max_iters);
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut multipliers = Vec::with_capacity(cfg.max_iters);
    let start = match cfg.variant {
        Variant::PolytopeStart => {
            iterates.push(relaxation);
            multipliers.push(0.0);
            records.push(record_iteration(&iterates, None, &instance.x_sol, instance.sigma)?);
            None
        }
        Variant::RandomStart => Some(init_random(instance, cfg)),
    };

    let mut hint = None;
    let mut stop_reason = StopReason::Budget;
    while iterates.len() < cfg.max_iters {
        let direction = iterates.last().or(start.as_ref()).map(|it| &it.x).expect("start or iterate");
        let k = iterates.len() + 1;
        let step = match sys.clup_step_with_hint(direction, r, &cfg.solver, hint) {
            Ok((step, _)) => step,
            Err(e) => {
                debug_assert!(
                    !(matches!(e, ClupError::Infeasible { .. }) && cfg.r_sc >= 1.0),
                    "r = r_sc * r_plt >= r_plt is always feasible"
                );
                return Err(e);
            }
        };
        let step = checked(step, "CLuP step")?;
        if step.multiplier > 0.0 {
            hint = Some(step.multiplier);
        }
        multipliers.push(step.multiplier);
        iterates.push(Iterate::new(k, step.x, instance, step.residual_norm)?);
        records.push(record_iteration(&iterates, start.as_ref(), &instance.x_sol, instance.sigma)?);

        if cfg.early_stop_tol > 0.0 && has_stalled(&records, cfg) {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    Ok(Trajectory {
        r_plt,
        r,
        start,
        iterates,
        records,
        multipliers,
        stop_reason,
    })
}

/// Consecutive CLuP-step objectives agree to `early_stop_tol`. The relaxation
/// record of the polytope start carries a placeholder `s_hat` and is skipped.
fn has_stalled(records: &[IterationRecord], cfg: &ClupConfig) -> bool {
    let first_genuine = match cfg.variant {
        Variant::PolytopeStart => 2,
        Variant::RandomStart => 1,
    };
    match records {
        [.., prev, last] if prev.k >= first_genuine => (last.s_hat - prev.s_hat).abs() < cfg.early_stop_tol,
        _ => false,
    }
}

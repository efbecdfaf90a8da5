//! Solver-versus-oracle comparison on tiny seeded instances.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::convex::{PreparedSystem, SolverSettings, SolverStatus};
use crate::error::Result;
use crate::harness::seed::derive;
use crate::linalg::{kkt_residual, residual_norm};
use crate::model::generate_instance;
use crate::oracle;

const ALPHA: f64 = 0.8;
const SIGMA: f64 = 0.3;
const R_SC: f64 = 1.3;
/// Radius floor when the relaxation fits `y` (almost) exactly.
const RADIUS_FLOOR: f64 = 0.1 * SIGMA;
const MIN_N: usize = 2;
const MAX_N: usize = 6;
const ORACLE_TAG: u64 = 0x6f72_6163_6c65;

#[derive(Debug, Clone, Serialize)]
pub struct OracleCase {
    pub case: usize,
    pub n: usize,
    pub m: usize,
    pub radius: f64,
    /// `‖y − A x‖` at the solver and oracle box least-squares optima.
    pub box_solver: f64,
    pub box_oracle: f64,
    pub box_kkt: f64,
    /// `−cᵀx` at the solver and oracle CLuP-step optima.
    pub step_solver: f64,
    pub step_oracle: f64,
    /// Max of the projected Lagrangian-gradient map and the ball violation.
    pub step_kkt: f64,
    pub converged: bool,
}

impl OracleCase {
    pub fn box_gap(&self) -> f64 {
        (self.box_solver - self.box_oracle).abs()
    }

    pub fn step_gap(&self) -> f64 {
        (self.step_solver - self.step_oracle).abs()
    }

    pub fn passes(&self, objective_tol: f64, kkt_tol: f64) -> bool {
        self.converged
            && self.box_gap() <= objective_tol
            && self.step_gap() <= objective_tol
            && self.box_kkt < kkt_tol
            && self.step_kkt < kkt_tol
    }
}

/// Runs `cases` seeded comparisons with `n` cycling over `2..=6` and
/// `m = round(0.8 n) <= 5`.
pub fn oracle_check(cases: usize, master_seed: u64, settings: &SolverSettings) -> Result<Vec<OracleCase>> {
    (0..cases).map(|case| check_case(case, master_seed, settings)).collect()
}

fn check_case(case: usize, master_seed: u64, settings: &SolverSettings) -> Result<OracleCase> {
    let n = MIN_N + case % (MAX_N - MIN_N + 1);
    let seed = derive(master_seed, &[ORACLE_TAG, case as u64]);
    let inst = generate_instance(n, ALPHA, SIGMA, seed)?;
    let (a, y, b) = (&inst.a, &inst.y, inst.bound());

    let sys = PreparedSystem::new(a, y)?;
    let ls = sys.box_ls(settings)?;
    let (x_or, half_sq) = oracle::box_ls(a, y, b)?;
    let box_oracle = (2.0 * half_sq).sqrt();
    debug_assert!((residual_norm(a, y, &x_or) - box_oracle).abs() < 1e-12);
    let box_kkt = kkt_residual(&ls.x, &(a.tr_mul(&(a * &ls.x - y))), b);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let c = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)).normalize();
    let radius = R_SC * box_oracle.max(RADIUS_FLOOR);

    let step = sys.clup_step(&c, radius, settings)?;
    let step_oracle = oracle::clup_step_value(a, y, &c, radius, b)?;
    let grad = -&c + a.tr_mul(&(a * &step.x - y)) * (2.0 * step.multiplier);
    let violation = (residual_norm(a, y, &step.x) - radius).max(0.0);
    let step_kkt = kkt_residual(&step.x, &grad, b).max(violation);

    Ok(OracleCase {
        case,
        n,
        m: inst.m,
        radius,
        box_solver: ls.objective,
        box_oracle,
        box_kkt,
        step_solver: step.objective,
        step_oracle,
        step_kkt,
        converged: ls.status == SolverStatus::Converged && step.status == SolverStatus::Converged,
    })
}

//! Controlled loosening-up (CLuP) detectors for binary MIMO ML detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] draws instances of `y = A x_sol + sigma v` in the linear regime.
//! * [`convex`] solves the two convex programs every CLuP iteration needs:
//!   box-constrained least squares (the polytope relaxation) and the CLuP step,
//!   a linear objective over a residual ball intersected with the hypercube.
//! * [`engine`] drives the outer iterations for the random-start and
//!   polytope-start variants.
//! * [`metrics`] turns trajectories into per-iteration overlaps, bit error
//!   rates and the cross-iteration `Q` bookkeeping, and aggregates trials.
//! * [`theory`] evaluates the first-iteration random duality predictions.
//! * [`harness`] runs seeded Monte Carlo grids and writes CSV/JSON/tables.
//! * [`oracle`] holds brute-force reference solvers for small instances.

pub mod convex;
pub mod engine;
mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod theory;

pub use convex::{solve_box_ls, solve_clup_step, SolverSettings, SolverStatus, SubproblemResult};

pub use error::{ClupError, Result};

pub use engine::{ClupConfig, Iterate, StopReason, Trajectory, Variant};
pub use metrics::{AggregateStats, IterationRecord};
pub use model::ProblemInstance;
pub use theory::TheoryFirstIter;


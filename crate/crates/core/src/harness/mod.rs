//! Monte Carlo experiment grid: `(variant, snr_db)` cells times trials.
//!
//! Every trial is an independent work unit keyed by its grid coordinates (see
//! [`seed`]). Results are gathered in `(cell, trial)` order whatever the
//! execution mode, so output does not depend on the worker count.

pub mod oracle_check;
pub mod output;
pub mod seed;

use std::path::PathBuf;

use serde::Serialize;

use crate::convex::SolverSettings;
use crate::engine::{self, ClupConfig, StopReason, Variant};
use crate::error::{ClupError, Result};
use crate::metrics::{aggregate, AggregateStats, IterationRecord};
use crate::model::{generate_instance, snr_db_to_sigma};
use crate::theory::{solve_first_iteration, TheoryFirstIter};

/// Largest tolerated fraction of failed trials over the whole grid.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Csv,
    Json,
    Table,
}

impl EmitFormat {
    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            "table" => Some(Self::Table),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub alpha: f64,
    pub snr_db: Vec<f64>,
    pub r_sc: f64,
    pub variants: Vec<Variant>,
    pub trials: usize,
    pub max_iters: usize,
    pub master_seed: u64,
    /// 0 runs every trial for the full `max_iters`.
    pub early_stop_tol: f64,
    #[serde(skip)]
    pub solver: SolverSettings,
    pub output_dir: Option<PathBuf>,
    pub emit: Vec<EmitFormat>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n: 800,
            alpha: 0.8,
            snr_db: vec![13.0],
            r_sc: 1.3,
            variants: vec![Variant::PolytopeStart],
            trials: 50,
            max_iters: 5,
            master_seed: 0,
            early_stop_tol: 0.0,
            solver: SolverSettings::default(),
            output_dir: None,
            emit: vec![EmitFormat::Table],
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ClupError::InvalidArgument(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.snr_db.is_empty() {
            return bad("at least one SNR is required".into());
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return bad(format!("SNR must be finite, got {s}"));
        }
        if self.variants.is_empty() {
            return bad("at least one variant is required".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        // Remaining fields are checked through the per-trial configuration.
        self.config(self.variants[0], 0).validate()
    }

    fn config(&self, variant: Variant, seed: u64) -> ClupConfig {
        ClupConfig {
            variant,
            r_sc: self.r_sc,
            max_iters: self.max_iters,
            early_stop_tol: self.early_stop_tol,
            solver: self.solver,
            seed,
        }
    }

    /// Grid cells in emission order: SNR-major, then variant.
    pub fn cells(&self) -> Vec<(Variant, f64)> {
        self.snr_db
            .iter()
            .flat_map(|&snr| self.variants.iter().map(move |&v| (v, snr)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon pool with the given worker count (`None`: rayon's default).
    /// Runs sequentially when the `parallel` feature is off.
    Parallel { workers: Option<usize> },
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecords {
    pub r_plt: f64,
    pub stop_reason: StopReason,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub instance_seed: u64,
    pub start_seed: u64,
    /// Solver failure message when the trial was excluded.
    pub error: Option<String>,
    pub result: Option<TrialRecords>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub variant: Variant,
    pub snr_db: f64,
    pub sigma: f64,
    pub failures: usize,
    /// Aggregate over the successful trials; absent when every trial failed.
    pub stats: Option<AggregateStats>,
    pub theory: Option<TheoryFirstIter>,
    pub theory_error: Option<String>,
    #[serde(skip)]
    pub outcomes: Vec<TrialOutcome>,
}

impl CellReport {
    pub fn successful(&self) -> impl Iterator<Item = (usize, &TrialRecords)> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().map(|r| (o.trial, r)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn total_trials(&self) -> usize {
        self.cells.iter().map(|c| c.outcomes.len()).sum()
    }

    pub fn total_failures(&self) -> usize {
        self.cells.iter().map(|c| c.failures).sum()
    }

    pub fn failure_rate(&self) -> f64 {
        self.total_failures() as f64 / self.total_trials().max(1) as f64
    }

    pub fn failure_budget_exceeded(&self) -> bool {
        self.failure_rate() > MAX_FAILURE_RATE
    }

    pub fn cell(&self, variant: Variant, snr_db: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.variant == variant && c.snr_db == snr_db)
    }
}

/// One trial of one cell. Solver errors become an excluded outcome.
pub fn run_trial(spec: &ExperimentSpec, variant: Variant, snr_db: f64, trial: usize) -> TrialOutcome {
    let instance_seed = seed::instance_seed(spec.master_seed, snr_db, trial);
    let start_seed = seed::start_seed(spec.master_seed, variant, snr_db, trial);
    let cfg = spec.config(variant, start_seed);
    let result = generate_instance(spec.n, spec.alpha, snr_db_to_sigma(snr_db), instance_seed)
        .and_then(|inst| engine::run(&inst, &cfg));
    let (result, error) = match result {
        Ok(t) => (
            Some(TrialRecords {
                r_plt: t.r_plt,
                stop_reason: t.stop_reason,
                records: t.records,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    TrialOutcome {
        trial,
        instance_seed,
        start_seed,
        error,
        result,
    }
}

/// Runs `tasks` in order and returns their outcomes in the same order.
fn run_tasks(spec: &ExperimentSpec, tasks: &[(Variant, f64, usize)], exec: Execution) -> Result<Vec<TrialOutcome>> {
    let one = |&(v, snr, t): &(Variant, f64, usize)| run_trial(spec, v, snr, t);
    match exec {
        Execution::Sequential => Ok(tasks.iter().map(one).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel { workers } => {
            use rayon::prelude::*;
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                if w == 0 {
                    return Err(ClupError::InvalidArgument("workers must be at least 1".into()));
                }
                builder = builder.num_threads(w);
            }
            let pool = builder
                .build()
                .map_err(|e| ClupError::InvalidArgument(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(|| tasks.par_iter().map(one).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel { workers } => {
            if workers == Some(0) {
                return Err(ClupError::InvalidArgument("workers must be at least 1".into()));
            }
            Ok(tasks.iter().map(one).collect())
        }
    }
}

/// Runs the whole grid and aggregates each cell.
pub fn run_experiment(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentReport> {
    spec.validate()?;
    let cells = spec.cells();
    let tasks: Vec<(Variant, f64, usize)> = cells
        .iter()
        .flat_map(|&(v, snr)| (0..spec.trials).map(move |t| (v, snr, t)))
        .collect();
    let mut outcomes = run_tasks(spec, &tasks, exec)?.into_iter();

    let mut reports = Vec::with_capacity(cells.len());
    for (variant, snr_db) in cells {
        let cell_outcomes: Vec<TrialOutcome> = outcomes.by_ref().take(spec.trials).collect();
        let records: Vec<Vec<IterationRecord>> = cell_outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().map(|r| r.records.clone()))
            .collect();
        let failures = cell_outcomes.len() - records.len();
        let stats = if records.is_empty() { None } else { Some(aggregate(&records)?) };
        let sigma = snr_db_to_sigma(snr_db);
        let (theory, theory_error) = match solve_first_iteration(spec.alpha, sigma) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        reports.push(CellReport {
            variant,
            snr_db,
            sigma,
            failures,
            stats,
            theory,
            theory_error,
            outcomes: cell_outcomes,
        });
    }
    Ok(ExperimentReport {
        spec: spec.clone(),
        cells: reports,
    })
}

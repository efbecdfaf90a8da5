//! `clup`: Monte Carlo driver for the CLuP and CLuP-plt detectors.
//!
//! Exit codes: 0 success, 1 runtime or oracle mismatch, 2 configuration error,
//! 3 trial failure rate above 1%.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};
use clup_core::harness::output::{emit_outputs, table_text};
use clup_core::harness::{run_experiment, oracle_check::oracle_check, EmitFormat, Execution, ExperimentSpec};
use clup_core::model::snr_db_to_sigma;
use clup_core::theory::solve_first_iteration;
use clup_core::{ClupError, SolverSettings, Variant};

use config::FileConfig;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURE_RATE: u8 = 3;

/// Objective and KKT tolerances of `oracle-check`.
const ORACLE_OBJECTIVE_TOL: f64 = 1e-6;
const ORACLE_KKT_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "clup", version, about = "CLuP / CLuP-plt MIMO detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo grid over SNRs and variants.
    Run(Box<RunArgs>),
    /// Print the first-iteration large-n prediction.
    Theory(TheoryArgs),
    /// Compare the subproblem solvers against brute-force oracles.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Repeatable.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    #[arg(long = "r-sc")]
    r_sc: Option<f64>,
    /// `clup` or `clup-plt`; repeatable.
    #[arg(long)]
    variant: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the emitted files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,table.
    #[arg(long, value_delimiter = ',')]
    emit: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Stop a trial once consecutive step objectives agree to this; 0 disables.
    #[arg(long = "early-stop-tol")]
    early_stop_tol: Option<f64>,
    /// Run trials on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long = "snr-db", default_value_t = 13.0, allow_negative_numbers = true)]
    snr_db: f64,
    /// Print JSON instead of aligned text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Exit(u8),
}

impl From<ClupError> for Failure {
    fn from(e: ClupError) -> Self {
        match e {
            ClupError::InvalidArgument(_) | ClupError::Dimension(_) => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(*args),
        Command::Theory(args) => cmd_theory(args),
        Command::OracleCheck(args) => cmd_oracle(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Exit(code)) => ExitCode::from(code),
    }
}

fn parse_variant(label: &str) -> Result<Variant> {
    Variant::from_label(label).ok_or_else(|| anyhow!("unknown variant '{label}' (expected clup or clup-plt)"))
}

fn parse_emit(label: &str) -> Result<EmitFormat> {
    EmitFormat::from_label(label).ok_or_else(|| anyhow!("unknown output format '{label}' (expected csv, json or table)"))
}

fn pick<T: FromStr>(flag: Option<T>, file: &FileConfig, key: &str, current: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.scalar(key)?.unwrap_or(current),
    })
}

/// Defaults, then the config file, then flags.
fn build_spec(args: &RunArgs) -> Result<(ExperimentSpec, Execution)> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut spec = ExperimentSpec::default();
    spec.n = pick(args.n, &file, "n", spec.n)?;
    spec.trials = pick(args.trials, &file, "trials", spec.trials)?;
    spec.max_iters = pick(args.max_iters, &file, "max-iters", spec.max_iters)?;
    spec.master_seed = pick(args.seed, &file, "seed", spec.master_seed)?;
    spec.alpha = pick(args.alpha, &file, "alpha", spec.alpha)?;
    spec.r_sc = pick(args.r_sc, &file, "r-sc", spec.r_sc)?;
    spec.early_stop_tol = pick(args.early_stop_tol, &file, "early-stop-tol", spec.early_stop_tol)?;
    spec.output_dir = args.out.clone().or(file.scalar("out")?);
    let workers: Option<usize> = args.workers.or(file.scalar("workers")?);

    if !args.snr_db.is_empty() {
        spec.snr_db = args.snr_db.clone();
    } else if !file.list("snr-db").is_empty() {
        spec.snr_db = file
            .list("snr-db")
            .iter()
            .map(|s| s.parse().map_err(|e| anyhow!("config key 'snr-db': invalid value '{s}': {e}")))
            .collect::<Result<_>>()?;
    }
    let variants = if args.variant.is_empty() { file.list("variant") } else { &args.variant };
    if !variants.is_empty() {
        spec.variants = variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
    }
    let emit = if args.emit.is_empty() { file.list("emit") } else { &args.emit };
    if !emit.is_empty() {
        spec.emit.clear();
        for label in emit {
            let fmt = parse_emit(label.trim())?;
            if !spec.emit.contains(&fmt) {
                spec.emit.push(fmt);
            }
        }
    }
    let writes_files = spec.emit.iter().any(|e| *e != EmitFormat::Table);
    if writes_files && spec.output_dir.is_none() {
        bail!("--out is required to emit csv or json");
    }
    spec.solver = SolverSettings::default();
    spec.validate()?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel { workers } };
    Ok((spec, exec))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let (spec, exec) = build_spec(&args).map_err(Failure::Config)?;
    let report = run_experiment(&spec, exec)?;
    if spec.emit.contains(&EmitFormat::Table) {
        print!("{}", table_text(&report));
    }
    if spec.output_dir.is_some() {
        for path in emit_outputs(&report)? {
            eprintln!("wrote {}", path.display());
        }
    }
    if report.failure_budget_exceeded() {
        eprintln!(
            "{} of {} trials failed ({:.2}%), above the 1% budget",
            report.total_failures(),
            report.total_trials(),
            100.0 * report.failure_rate()
        );
        return Err(Failure::Exit(EXIT_FAILURE_RATE));
    }
    Ok(())
}

fn cmd_theory(args: TheoryArgs) -> Result<(), Failure> {
    let t = solve_first_iteration(args.alpha, snr_db_to_sigma(args.snr_db))?;
    if args.json {
        let text = serde_json::to_string_pretty(&t).map_err(|e| Failure::Runtime(e.into()))?;
        println!("{text}");
        return Ok(());
    }
    println!("alpha      {}", t.alpha);
    println!("snr_db     {}", args.snr_db);
    println!("sigma      {:.10}", t.sigma);
    println!("gamma_hat  {:.10}", t.gamma_hat);
    println!("c1z_hat    {:.10}", t.c1z_hat);
    println!("xi         {:.10}", t.xi);
    println!("nu_hat     {}", t.nu_hat);
    println!("s1_hat     {}", t.s1_hat);
    println!("p_err1     {:.10}", t.p_err1);
    println!("e_z        {:.10}", t.e_z);
    println!("e_zsq      {:.10}", t.e_zsq);
    println!("d2_pred    {:.10}", t.d2_pred);
    println!("d1_pred    {:.10}", t.d1_pred);
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Failure> {
    let cases = oracle_check(args.cases, args.seed, &SolverSettings::default())?;
    let worst = |f: fn(&clup_core::harness::oracle_check::OracleCase) -> f64| cases.iter().map(f).fold(0.0, f64::max);
    println!("cases                   {}", cases.len());
    println!("max |box objective gap| {:.3e}", worst(|c| c.box_gap()));
    println!("max |step objective gap| {:.3e}", worst(|c| c.step_gap()));
    println!("max box KKT residual    {:.3e}", worst(|c| c.box_kkt));
    println!("max step KKT residual   {:.3e}", worst(|c| c.step_kkt));
    let failing: Vec<_> = cases.iter().filter(|c| !c.passes(ORACLE_OBJECTIVE_TOL, ORACLE_KKT_TOL)).collect();
    for c in &failing {
        println!("FAIL case {} (n={}, m={}): {c:?}", c.case, c.n, c.m);
    }
    if failing.is_empty() {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure::Exit(EXIT_RUNTIME))
    }
}

//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Reference values are simulated (n = 800) and large-n predicted figures for
//! the same settings. Monte Carlo comparisons use 3 standard errors of the
//! mean unless a fixed band is given. The process exits nonzero if any
//! criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use clup_core::convex::PreparedSystem;
use clup_core::engine::run;
use clup_core::harness::oracle_check::oracle_check;
use clup_core::harness::output::summary_json;
use clup_core::harness::seed::{derive, splitmix64};
use clup_core::harness::{run_experiment, CellReport, Execution, ExperimentReport, ExperimentSpec};
use clup_core::linalg::{kkt_residual, residual_norm};
use clup_core::metrics::{IterationSummary, MeanSe};
use clup_core::model::generate_instance;
use clup_core::theory::{error_moments, first_iteration_error, integrals_i, solve_first_iteration, xi_rd1};
use clup_core::{ClupConfig, SolverSettings, SolverStatus, Variant};
use nalgebra::DVector;
use quadrature::double_exponential::integrate;

const MASTER_SEED: u64 = 0;
const TRIALS: usize = 50;
const SE_BAND: f64 = 3.0;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details.push(if ok { detail } else { format!("{detail} [x]") });
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.check(
            (value - target).abs() <= tol,
            format!("{name} {value:.5} vs {target} (tol {tol:.2e})"),
        );
    }

    fn within_se(&mut self, name: &str, m: &MeanSe, target: f64) {
        let tol = SE_BAND * m.se;
        self.check(
            (m.mean - target).abs() <= tol,
            format!("{name} {:.5} ± {:.5} vs {target} ({:.1} se)", m.mean, m.se, (m.mean - target).abs() / m.se),
        );
    }

    fn runtime(&mut self, elapsed: Duration, limit: Duration) {
        self.check(elapsed <= limit, format!("runtime {:.1}s <= {}s", elapsed.as_secs_f64(), limit.as_secs()));
    }
}

fn report(id: usize, title: &str, outcome: &Outcome) -> bool {
    let status = if outcome.pass { "PASS" } else { "FAIL" };
    println!("criterion {id} {status}: {title}");
    for d in &outcome.details {
        println!("    {d}");
    }
    outcome.pass
}

fn iteration(cell: &CellReport, k: usize) -> &IterationSummary {
    cell.stats
        .as_ref()
        .and_then(|s| s.iteration(k))
        .unwrap_or_else(|| panic!("no iteration {k} for {:?} at {} dB", cell.variant, cell.snr_db))
}

fn experiment(snr_db: f64, variants: Vec<Variant>, max_iters: usize) -> (ExperimentReport, Duration) {
    let spec = ExperimentSpec {
        snr_db: vec![snr_db],
        variants,
        trials: TRIALS,
        max_iters,
        master_seed: MASTER_SEED,
        ..ExperimentSpec::default()
    };
    let start = Instant::now();
    let report = run_experiment(&spec, Execution::Parallel { workers: None }).expect("experiment");
    (report, start.elapsed())
}

fn theory_reproduction() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_clup"))
        .args(["theory", "--alpha", "0.8", "--snr-db", "13", "--json"])
        .output()
        .expect("spawn clup");
    let elapsed = start.elapsed();
    out.check(output.status.success(), format!("exit status {}", output.status));
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).expect("theory json");
    let field = |k: &str| v[k].as_f64().unwrap_or(f64::NAN);
    out.within("gamma_hat", field("gamma_hat"), 1.2233, 1e-3);
    out.within("c1z_hat", field("c1z_hat"), 0.0835, 1e-3);
    out.within("xi", field("xi"), 0.1226, 1e-3);
    out.within("p_err1", field("p_err1"), 0.0072, 2e-4);
    out.within("d2", field("d2_pred"), 0.7574, 1e-3);
    out.within("d1", field("d1_pred"), 0.8369, 1e-3);
    out.runtime(elapsed, Duration::from_secs(5));
    out
}

fn phi(h: f64) -> f64 {
    (-0.5 * h * h).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn closed_forms_vs_quadrature() -> Outcome {
    const TAIL: f64 = -40.0;
    let mut out = Outcome::new();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..20 {
        let gamma = 0.05 * 200f64.powf(i as f64 / 19.0);
        // Per-coordinate problem min_{u in [0,2]} h u + gamma u²: interior on
        // (-4 gamma, 0), clipped at u = 2 below -4 gamma.
        let knot = (-4.0 * gamma).max(TAIL);
        let q11 = integrate(|h: f64| -h * h / (4.0 * gamma) * phi(h), knot, 0.0, 1e-14).integral;
        let q21 = integrate(|h: f64| (2.0 * h + 4.0 * gamma) * phi(h), TAIL, knot, 1e-14).integral;
        let (i11, i21) = integrals_i(gamma).expect("closed forms");
        let q_err = integrate(phi, TAIL, (-2.0 * gamma).max(TAIL), 1e-14).integral;
        let p_err = first_iteration_error(gamma).expect("p_err");
        let (e_z, _) = error_moments(gamma).expect("moments");
        let q_z = integrate(|h: f64| -h / (2.0 * gamma) * phi(h), knot, 0.0, 1e-14).integral
            + 2.0 * integrate(phi, TAIL, knot, 1e-14).integral;
        for gap in [i11 - q11, i21 - q21, p_err - q_err, e_z - q_z] {
            worst = worst.max(gap.abs());
        }
    }
    out.check(worst < 1e-8, format!("max |closed form - quadrature| {worst:.2e} over 20 gammas (I11, I21, p_err, E z)"));
    out.runtime(start.elapsed(), Duration::from_secs(30));
    out
}

fn oracle_equivalence() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let cases = oracle_check(100, MASTER_SEED, &SolverSettings::default()).expect("oracle check");
    let failing = cases.iter().filter(|c| !c.passes(1e-6, 1e-6)).count();
    let max = |f: &dyn Fn(&clup_core::harness::oracle_check::OracleCase) -> f64| {
        cases.iter().map(f).fold(0.0f64, f64::max)
    };
    out.check(cases.len() == 100, format!("{} cases", cases.len()));
    out.check(cases.iter().all(|c| c.n <= 6 && c.m <= 5), "n <= 6, m <= 5".into());
    out.check(
        failing == 0,
        format!(
            "{failing} failing; max gaps box {:.1e} step {:.1e}; max kkt box {:.1e} step {:.1e}",
            max(&|c| c.box_gap()),
            max(&|c| c.step_gap()),
            max(&|c| c.box_kkt),
            max(&|c| c.step_kkt)
        ),
    );
    out.runtime(start.elapsed(), Duration::from_secs(120));
    out
}

fn plt_table(plt: &CellReport, elapsed: Duration) -> Outcome {
    let mut out = Outcome::new();
    out.check(plt.successful().count() >= TRIALS, format!("{} successful trials", plt.successful().count()));
    out.within_se("p_err(1)", &iteration(plt, 1).p_err, 0.00776);
    out.within_se("s_hat(2)", &iteration(plt, 2).s_hat, 0.9495);
    out.within_se("d2(2)", &iteration(plt, 2).d2, 0.9390);
    out.within_se("d1(2)", &iteration(plt, 2).d1, 0.9616);
    out.within_se("s_hat(3)", &iteration(plt, 3).s_hat, 0.9710);
    out.within_se("d1(3)", &iteration(plt, 3).d1, 0.9661);
    let p2 = iteration(plt, 2).p_err.mean;
    let p3 = iteration(plt, 3).p_err.mean;
    out.check(p2 <= 0.002, format!("p_err(2) {p2:.5} <= 0.002"));
    out.check(p3 <= 0.004, format!("p_err(3) {p3:.5} <= 0.004"));
    out.runtime(elapsed, Duration::from_secs(600));
    out
}

fn random_table(rnd: &CellReport, plt: &CellReport) -> Outcome {
    let mut out = Outcome::new();
    out.within_se("d1(1)", &iteration(rnd, 1).d1, 0.7658);
    out.within_se("p_err(1)", &iteration(rnd, 1).p_err, 0.0447);
    out.within_se("p_err(4)", &iteration(rnd, 4).p_err, 0.00033);
    out.within_se("s_hat(5)", &iteration(rnd, 5).s_hat, 0.9719);
    let (a, b) = (iteration(plt, 2).p_err.mean, iteration(rnd, 2).p_err.mean);
    out.check(a < b, format!("paired p_err(2): plt {a:.5} < random {b:.5}"));
    out
}

fn q_matrix(plt: &CellReport) -> Outcome {
    let mut out = Outcome::new();
    let stats = plt.stats.as_ref().expect("plt stats");
    for (k, j, target) in [(2, 1, 0.8300), (3, 1, 0.7915), (3, 2, 0.9893)] {
        let q = stats.q(k, j).unwrap_or(f64::NAN);
        out.within(&format!("Q({k},{j})"), q, target, 0.02);
    }
    out
}

/// Mean of per-trial `p_err^(k+1) - p_err^(k)` must not exceed its own
/// standard error.
fn p_err_nonincreasing(out: &mut Outcome, cell: &CellReport) {
    let trials: Vec<_> = cell.successful().map(|(_, r)| &r.records).collect();
    let depth = trials.iter().map(|r| r.len()).min().unwrap_or(0);
    for k in 1..depth {
        let diffs: Vec<f64> = trials.iter().map(|r| r[k].p_err - r[k - 1].p_err).collect();
        let d = MeanSe::of(&diffs);
        out.check(
            d.mean <= d.se,
            format!("{} dB: p_err({}) - p_err({k}) = {:.6} ± {:.6}", cell.snr_db, k + 1, d.mean, d.se),
        );
    }
}

fn snr_sweep() -> Outcome {
    let mut out = Outcome::new();
    let (r12, t12) = experiment(12.0, vec![Variant::PolytopeStart], 5);
    let (r11, t11) = experiment(11.0, vec![Variant::PolytopeStart], 8);
    let c12 = r12.cell(Variant::PolytopeStart, 12.0).expect("12 dB cell");
    let c11 = r11.cell(Variant::PolytopeStart, 11.0).expect("11 dB cell");
    out.within("12 dB p_err(5)", iteration(c12, 5).p_err.mean, 0.00085, 0.0004);
    out.within("12 dB s_hat(5)", iteration(c12, 5).s_hat.mean, 0.9677, 0.01);
    out.within("11 dB p_err(8)", iteration(c11, 8).p_err.mean, 0.00255, 0.001);
    out.within("11 dB d2(8)", iteration(c11, 8).d2.mean, 0.9348, 0.01);
    p_err_nonincreasing(&mut out, c12);
    p_err_nonincreasing(&mut out, c11);
    out.runtime(t12 + t11, Duration::from_secs(25 * 60));
    out
}

fn uniform(state: &mut u64) -> f64 {
    *state = splitmix64(*state);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

fn invariant_suites() -> Outcome {
    const CASES: usize = 200;
    let mut out = Outcome::new();
    let settings = SolverSettings::default();
    let mut bad: [Vec<usize>; 4] = Default::default();

    for case in 0..CASES {
        let mut s = derive(MASTER_SEED, &[0x696e_7661, case as u64]);
        let n = 8 + (uniform(&mut s) * 33.0) as usize;
        let sigma = 0.05 + 0.45 * uniform(&mut s);
        let inst = generate_instance(n, 0.8, sigma, s).expect("instance");
        let (a, y, b) = (&inst.a, &inst.y, inst.bound());
        let feasible = |x: &DVector<f64>| x.iter().all(|v| v.abs() <= b * (1.0 + 1e-12));

        // Subproblems: feasibility and KKT certificates.
        let sys = PreparedSystem::new(a, y).expect("system");
        let ls = sys.box_ls(&settings).expect("box ls");
        let ls_kkt = kkt_residual(&ls.x, &a.tr_mul(&(a * &ls.x - y)), b);
        let r = 1.3 * ls.residual_norm;
        let c = DVector::from_fn(n, |_, _| 2.0 * uniform(&mut s) - 1.0).normalize();
        let step = sys.clup_step(&c, r, &settings).expect("clup step");
        let grad = -&c + a.tr_mul(&(a * &step.x - y)) * (2.0 * step.multiplier);
        let step_ok = step.status == SolverStatus::Converged
            && feasible(&step.x)
            && residual_norm(a, y, &step.x) <= r * (1.0 + settings.radius_tol)
            && kkt_residual(&step.x, &grad, b) < 1e-6;
        let ls_ok = ls.status == SolverStatus::Converged
            && feasible(&ls.x)
            && ls_kkt < 1e-8 * (1.0 + a.tr_mul(y).amax());
        if !(ls_ok && step_ok) {
            bad[0].push(case);
        }

        // Trajectory identities.
        let variant = if case % 2 == 0 { Variant::PolytopeStart } else { Variant::RandomStart };
        let cfg = ClupConfig { max_iters: 3, seed: s, ..ClupConfig::new(variant) };
        let traj = run(&inst, &cfg).expect("trajectory");
        let identities = traj.iterates.iter().zip(&traj.records).all(|(it, rec)| {
            feasible(&it.x_s)
                && (rec.c2z - it.z.norm_squared()).abs() < 1e-10
                && (rec.s3 - (1.0 - rec.d1)).abs() < 1e-15
                && (rec.d1 - inst.x_sol.dot(&it.x_s)).abs() < 1e-12
                && (rec.d2 - it.x_s.norm_squared()).abs() < 1e-12
        });
        let rerun = run(&inst, &cfg).expect("trajectory");
        if !(identities && rerun.records == traj.records) {
            bad[1].push(case);
        }

        // Saddle stationarity by central differences.
        let alpha = 0.6 + 0.9 * uniform(&mut s);
        let snr = 6.0 + 14.0 * uniform(&mut s);
        let sig = 10f64.powf(-snr / 20.0);
        let t = solve_first_iteration(alpha, sig).expect("theory");
        let f = |c: f64, g: f64| xi_rd1(alpha, sig, c, g).expect("xi");
        let h = 1e-6;
        let dg = (f(t.c1z_hat, t.gamma_hat + h) - f(t.c1z_hat, t.gamma_hat - h)) / (2.0 * h);
        let dc = (f(t.c1z_hat + h, t.gamma_hat) - f(t.c1z_hat - h, t.gamma_hat)) / (2.0 * h);
        if !(dg.abs() <= 1e-5 && dc.abs() <= 1e-4 && (t.e_zsq - t.c1z_hat).abs() < 1e-6) {
            bad[2].push(case);
        }
    }

    // Thread-count independence on small grids.
    for case in 0..CASES / 20 {
        let spec = ExperimentSpec {
            n: 24,
            snr_db: vec![13.0, 10.0],
            variants: vec![Variant::PolytopeStart, Variant::RandomStart],
            trials: 3,
            max_iters: 3,
            master_seed: case as u64,
            ..ExperimentSpec::default()
        };
        let seq = run_experiment(&spec, Execution::Sequential).expect("sequential");
        let par = run_experiment(&spec, Execution::Parallel { workers: Some(3) }).expect("parallel");
        if summary_json(&seq).expect("json") != summary_json(&par).expect("json") {
            bad[3].push(case);
        }
    }

    for (name, cases, total) in [
        ("subproblem feasibility and KKT", &bad[0], CASES),
        ("trajectory identities and determinism", &bad[1], CASES),
        ("saddle stationarity", &bad[2], CASES),
        ("1 vs 3 workers", &bad[3], CASES / 20),
    ] {
        let shown: Vec<_> = cases.iter().take(5).collect();
        out.check(
            cases.is_empty(),
            format!("{name}: {}/{total} violations {shown:?}", cases.len()),
        );
    }
    out
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, "first-iteration theory at alpha 0.8, 13 dB", &theory_reproduction());
    all &= report(2, "closed forms vs adaptive quadrature", &closed_forms_vs_quadrature());
    all &= report(3, "subproblem solvers vs exhaustive oracles", &oracle_equivalence());

    let (r13, t13) = experiment(13.0, vec![Variant::PolytopeStart, Variant::RandomStart], 5);
    let plt = r13.cell(Variant::PolytopeStart, 13.0).expect("plt cell");
    let rnd = r13.cell(Variant::RandomStart, 13.0).expect("random cell");
    all &= report(4, "polytope start, 13 dB, n 800", &plt_table(plt, t13));
    all &= report(5, "random start, 13 dB, n 800", &random_table(rnd, plt));
    all &= report(6, "overlap matrix, polytope start", &q_matrix(plt));
    all &= report(7, "SNR sweep at 12 and 11 dB", &snr_sweep());
    all &= report(8, "randomized invariants", &invariant_suites());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

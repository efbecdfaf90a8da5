//! CSV, JSON and plain-text renderings of an [`ExperimentReport`].

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::PathBuf;

use serde::Serialize;

use crate::engine::Variant;
use crate::error::{ClupError, Result};
use crate::harness::{CellReport, EmitFormat, ExperimentReport, ExperimentSpec};
use crate::metrics::{IterationSummary, MeanSe};
use crate::theory::TheoryFirstIter;

pub const CSV_FILE: &str = "trials.csv";
pub const JSON_FILE: &str = "summary.json";
pub const TABLE_FILE: &str = "table.txt";

const BASE_COLUMNS: [&str; 13] = [
    "variant", "snr_db", "alpha", "n", "r_sc", "trial", "iter", "p_err", "s_hat", "d1", "d2", "s3", "c2z",
];

fn deepest(report: &ExperimentReport) -> usize {
    report
        .cells
        .iter()
        .flat_map(|c| c.successful().map(|(_, r)| r.records.len()))
        .max()
        .unwrap_or(0)
}

/// Per-trial rows, one per executed iteration, with a `q_{k,j}` column for
/// every pair `j < k` up to the deepest trajectory. Only the row of iterate
/// `k` fills its `q_{k,·}` cells; the rest stay empty.
pub fn write_csv<W: io::Write>(report: &ExperimentReport, sink: W) -> Result<()> {
    let depth = deepest(report);
    let pairs: Vec<(usize, usize)> = (2..=depth).flat_map(|k| (1..k).map(move |j| (k, j))).collect();
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(pairs.iter().map(|(k, j)| format!("q_{k}_{j}")));
    w.write_record(&header)?;

    let spec = &report.spec;
    for cell in &report.cells {
        for (trial, recs) in cell.successful() {
            for rec in &recs.records {
                let mut row = vec![
                    cell.variant.label().to_string(),
                    cell.snr_db.to_string(),
                    spec.alpha.to_string(),
                    spec.n.to_string(),
                    spec.r_sc.to_string(),
                    trial.to_string(),
                    rec.k.to_string(),
                    rec.p_err.to_string(),
                    rec.s_hat.to_string(),
                    rec.d1.to_string(),
                    rec.d2.to_string(),
                    rec.s3.to_string(),
                    rec.c2z.to_string(),
                ];
                row.extend(pairs.iter().map(|&(k, j)| {
                    if k == rec.k {
                        rec.q_row.get(j - 1).map_or(String::new(), f64::to_string)
                    } else {
                        String::new()
                    }
                }));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: Tool,
    config: &'a ExperimentSpec,
    rng: &'static str,
    trials: usize,
    failures: usize,
    failure_rate: f64,
    cells: Vec<CellSummary<'a>>,
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct CellSummary<'a> {
    variant: Variant,
    snr_db: f64,
    sigma: f64,
    trials: usize,
    failures: usize,
    failed_trials: Vec<FailedTrial<'a>>,
    theory: Option<&'a TheoryFirstIter>,
    theory_error: Option<&'a str>,
    first_iteration: Option<FirstIteration>,
    iterations: &'a [IterationSummary],
    q_matrix: &'a [Vec<f64>],
}

#[derive(Serialize)]
struct FailedTrial<'a> {
    trial: usize,
    error: &'a str,
}

/// Iterate-1 simulation next to the theory prediction.
#[derive(Serialize)]
struct FirstIteration {
    p_err: Pair,
    d1: Pair,
    d2: Pair,
}

#[derive(Serialize)]
struct Pair {
    simulated: MeanSe,
    theory: f64,
}

fn first_iteration(cell: &CellReport) -> Option<FirstIteration> {
    let t = cell.theory.as_ref()?;
    let s = cell.stats.as_ref()?.iteration(1)?;
    (cell.variant == Variant::PolytopeStart).then_some(FirstIteration {
        p_err: Pair { simulated: s.p_err, theory: t.p_err1 },
        d1: Pair { simulated: s.d1, theory: t.d1_pred },
        d2: Pair { simulated: s.d2, theory: t.d2_pred },
    })
}

/// Pretty-printed JSON summary; re-parsing and re-printing it is the identity.
pub fn summary_json(report: &ExperimentReport) -> Result<String> {
    let cells = report
        .cells
        .iter()
        .map(|cell| CellSummary {
            variant: cell.variant,
            snr_db: cell.snr_db,
            sigma: cell.sigma,
            trials: cell.outcomes.len(),
            failures: cell.failures,
            failed_trials: cell
                .outcomes
                .iter()
                .filter_map(|o| o.error.as_deref().map(|error| FailedTrial { trial: o.trial, error }))
                .collect(),
            theory: cell.theory.as_ref(),
            theory_error: cell.theory_error.as_deref(),
            first_iteration: first_iteration(cell),
            iterations: cell.stats.as_ref().map_or(&[], |s| &s.per_iteration),
            q_matrix: cell.stats.as_ref().map_or(&[], |s| &s.q_matrix),
        })
        .collect();
    let summary = Summary {
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        config: &report.spec,
        rng: "ChaCha8 (rand_chacha); seeds folded with SplitMix64",
        trials: report.total_trials(),
        failures: report.total_failures(),
        failure_rate: report.failure_rate(),
        cells,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    Ok(text)
}

fn sim_theory(sim: f64, theory: Option<f64>, digits: usize) -> String {
    match theory {
        Some(t) => format!("{sim:.digits$} / {t:.digits$}"),
        None => format!("{sim:.digits$}"),
    }
}

/// Aligned text tables, one per cell: iteration means with the first-iteration
/// theory after a slash, then the averaged `Q` matrix.
pub fn table_text(report: &ExperimentReport) -> String {
    let spec = &report.spec;
    let mut out = String::new();
    for cell in &report.cells {
        let _ = writeln!(
            out,
            "{}  snr={} dB  alpha={}  r_sc={}  n={}  trials={}  failures={}",
            cell.variant,
            cell.snr_db,
            spec.alpha,
            spec.r_sc,
            spec.n,
            cell.outcomes.len(),
            cell.failures
        );
        let Some(stats) = &cell.stats else {
            let _ = writeln!(out, "  (no successful trials)\n");
            continue;
        };
        let theory = cell.theory.as_ref().filter(|_| cell.variant == Variant::PolytopeStart);
        let rows: Vec<[String; 5]> = stats
            .per_iteration
            .iter()
            .map(|s| {
                let t = theory.filter(|_| s.k == 1);
                [
                    s.k.to_string(),
                    sim_theory(s.p_err.mean, t.map(|t| t.p_err1), 5),
                    sim_theory(s.s_hat.mean, t.map(|_| 0.0), 4),
                    sim_theory(s.d2.mean, t.map(|t| t.d2_pred), 4),
                    sim_theory(s.d1.mean, t.map(|t| t.d1_pred), 4),
                ]
            })
            .collect();
        let header = ["k", "p_err", "s_hat", "d2 = |x_s|^2", "d1 = x_sol'x_s"].map(String::from);
        let widths: Vec<usize> = (0..5)
            .map(|c| rows.iter().chain([&header]).map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        for row in [&header].into_iter().chain(&rows) {
            let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
            let _ = writeln!(out, "  {}", line.join("  "));
        }
        let _ = writeln!(out, "  Q:");
        for row in &stats.q_matrix {
            let line: Vec<String> = row.iter().map(|q| format!("{q:.4}")).collect();
            let _ = writeln!(out, "    {}", line.join("  "));
        }
        out.push('\n');
    }
    out
}

/// Writes the formats requested in the spec into `spec.output_dir`.
pub fn emit_outputs(report: &ExperimentReport) -> Result<Vec<PathBuf>> {
    let spec = &report.spec;
    let dir = spec
        .output_dir
        .as_ref()
        .ok_or_else(|| ClupError::InvalidArgument("no output directory configured".into()))?;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for fmt in &spec.emit {
        let path = match fmt {
            EmitFormat::Csv => {
                let path = dir.join(CSV_FILE);
                write_csv(report, fs::File::create(&path)?)?;
                path
            }
            EmitFormat::Json => {
                let path = dir.join(JSON_FILE);
                fs::write(&path, summary_json(report)?)?;
                path
            }
            EmitFormat::Table => {
                let path = dir.join(TABLE_FILE);
                fs::write(&path, table_text(report))?;
                path
            }
        };
        written.push(path);
    }
    Ok(written)
}

//! Per-iteration summaries of a trajectory and their Monte Carlo aggregates.
//!
//! For iterate `k` with un-normalized solution `x^(k,s)` and error vector
//! `z^(k) = x_sol − x^(k,s)`:
//!
//! | field   | value                                        |
//! |---------|----------------------------------------------|
//! | `p_err` | fraction of coordinates with `x^(k,s)_i <= 0` |
//! | `s_hat` | `(x^(k−1))ᵀ x^(k,s)`, previous *normalized* iterate |
//! | `d1`    | `x_solᵀ x^(k,s)`                              |
//! | `d2`    | `‖x^(k,s)‖²`                                  |
//! | `s3`    | `1 − d1`                                      |
//! | `c2z`   | `d2 − 2 d1 + 1` (equals `‖z^(k)‖²`)           |
//! | `s2[j]` | `(x^(j,s))ᵀ z^(k)` for `j < k`                |
//! | `q_row[j]` | `(s3 + σ² − s2[j]) / (sqrt(c2z^(k) + σ²) sqrt(c2z^(j) + σ²))` |
//!
//! The numerator of `q_row[j]` expands to `(z^(j))ᵀ z^(k) + σ²`, so the
//! convention "current iterate supplies `s3`, earlier iterate supplies the
//! `s2` row" gives the same value as the swapped assignment; `Q` is a
//! correlation matrix of the augmented vectors `[z^(k); σ]`.

use nalgebra::DVector;
use serde::Serialize;

use crate::engine::Iterate;
use crate::error::{ClupError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub p_err: f64,
    pub s_hat: f64,
    pub d1: f64,
    pub d2: f64,
    pub s3: f64,
    pub c2z: f64,
    pub s2: Vec<f64>,
    pub q_row: Vec<f64>,
}

/// Fraction of coordinates whose sign disagrees with the all-positive `x_sol`.
/// A zero coordinate counts as an error.
pub fn bit_error_rate(x_s: &DVector<f64>, x_sol: &DVector<f64>) -> Result<f64> {
    if x_s.len() != x_sol.len() {
        return Err(ClupError::Dimension(format!(
            "iterate has length {} but x_sol has length {}",
            x_s.len(),
            x_sol.len()
        )));
    }
    if x_s.is_empty() {
        return Err(ClupError::Empty("iterate"));
    }
    let errors = x_s
        .iter()
        .zip(x_sol.iter())
        .filter(|(xi, ti)| xi.signum() != ti.signum() || **xi == 0.0)
        .count();
    Ok(errors as f64 / x_s.len() as f64)
}

/// Summarizes the last entry of `iterates` (iterate `k = iterates.len()`).
///
/// `start` is the random starting point of the random-start variant; its
/// normalized vector is the "previous iterate" for `k = 1`. Without it the
/// first record has `s_hat = 0`.
pub fn record_iteration(
    iterates: &[Iterate],
    start: Option<&Iterate>,
    x_sol: &DVector<f64>,
    sigma: f64,
) -> Result<IterationRecord> {
    let current = iterates.last().ok_or(ClupError::Empty("iterates"))?;
    let k = iterates.len();
    if current.x_s.len() != x_sol.len() {
        return Err(ClupError::Dimension(format!(
            "iterate has length {} but x_sol has length {}",
            current.x_s.len(),
            x_sol.len()
        )));
    }
    let sigma_sq = sigma * sigma;

    let previous = if k >= 2 {
        Some(&iterates[k - 2].x)
    } else {
        start.map(|s| &s.x)
    };
    let s_hat = previous.map_or(0.0, |p| p.dot(&current.x_s));
    let d1 = x_sol.dot(&current.x_s);
    let d2 = current.x_s.norm_squared();
    let s3 = 1.0 - d1;
    let c2z = d2 - 2.0 * d1 + 1.0;

    let mut s2 = Vec::with_capacity(k - 1);
    let mut q_row = Vec::with_capacity(k - 1);
    for earlier in &iterates[..k - 1] {
        let s2_j = earlier.x_s.dot(&current.z);
        let c2z_j = earlier.z.norm_squared();
        s2.push(s2_j);
        q_row.push((s3 + sigma_sq - s2_j) / ((c2z + sigma_sq).sqrt() * (c2z_j + sigma_sq).sqrt()));
    }

    Ok(IterationRecord {
        k,
        p_err: bit_error_rate(&current.x_s, x_sol)?,
        s_hat,
        d1,
        d2,
        s3,
        c2z,
        s2,
        q_row,
    })
}

/// `Q_{k,j}` with the roles swapped: iterate `j` supplies `s3` and the overlap
/// is taken against `z^(j)`. Agrees with `q_row` up to rounding.
pub fn q_entry_swapped(current: &Iterate, earlier: &Iterate, x_sol: &DVector<f64>, sigma: f64) -> f64 {
    let sigma_sq = sigma * sigma;
    let s3_j = 1.0 - x_sol.dot(&earlier.x_s);
    let s2 = current.x_s.dot(&earlier.z);
    (s3_j + sigma_sq - s2)
        / ((current.z.norm_squared() + sigma_sq).sqrt() * (earlier.z.norm_squared() + sigma_sq).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation / sqrt(count)).
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        if count == 1 {
            return Self { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        Self {
            mean,
            se: (var / count as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationSummary {
    pub k: usize,
    /// Trials that reached this iteration.
    pub trials: usize,
    /// Mean over trials; with a common `n` this is the error rate pooled over
    /// all `n * trials` bits.
    pub p_err: MeanSe,
    pub s_hat: MeanSe,
    pub d1: MeanSe,
    pub d2: MeanSe,
    pub s3: MeanSe,
    pub c2z: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    pub per_iteration: Vec<IterationSummary>,
    /// Entrywise trial average of `Q`, unit diagonal, `q_matrix[k-1][j-1]`.
    pub q_matrix: Vec<Vec<f64>>,
    pub trials: usize,
}

impl AggregateStats {
    pub fn iteration(&self, k: usize) -> Option<&IterationSummary> {
        self.per_iteration.iter().find(|s| s.k == k)
    }

    /// `Q_{k,j}` with 1-based indices.
    pub fn q(&self, k: usize, j: usize) -> Option<f64> {
        self.q_matrix.get(k.checked_sub(1)?)?.get(j.checked_sub(1)?).copied()
    }
}

/// Averages per-trial records iteration by iteration.
///
/// Trials are expected to share the iteration budget; when some stop early,
/// iteration `k` is summarized over the trials that reached it.
pub fn aggregate(records: &[Vec<IterationRecord>]) -> Result<AggregateStats> {
    if records.is_empty() {
        return Err(ClupError::Empty("trial records"));
    }
    let depth = records.iter().map(Vec::len).max().unwrap_or(0);
    if depth == 0 {
        return Err(ClupError::Empty("iteration records"));
    }

    let mut per_iteration = Vec::with_capacity(depth);
    for idx in 0..depth {
        let at_k: Vec<&IterationRecord> = records.iter().filter_map(|t| t.get(idx)).collect();
        let column = |f: fn(&IterationRecord) -> f64| MeanSe::of(&at_k.iter().map(|r| f(r)).collect::<Vec<_>>());
        per_iteration.push(IterationSummary {
            k: idx + 1,
            trials: at_k.len(),
            p_err: column(|r| r.p_err),
            s_hat: column(|r| r.s_hat),
            d1: column(|r| r.d1),
            d2: column(|r| r.d2),
            s3: column(|r| r.s3),
            c2z: column(|r| r.c2z),
        });
    }

    let mut q_matrix = vec![vec![0.0; depth]; depth];
    #[allow(clippy::needless_range_loop)] // fills both triangles
    for k in 0..depth {
        q_matrix[k][k] = 1.0;
        for j in 0..k {
            let values: Vec<f64> = records
                .iter()
                .filter_map(|t| t.get(k).and_then(|r| r.q_row.get(j)).copied())
                .collect();
            let mean = MeanSe::of(&values).mean;
            q_matrix[k][j] = mean;
            q_matrix[j][k] = mean;
        }
    }

    Ok(AggregateStats {
        per_iteration,
        q_matrix,
        trials: records.len(),
    })
}

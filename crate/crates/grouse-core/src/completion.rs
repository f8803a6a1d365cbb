//! Low-rank matrix completion by streaming the observed columns through the
//! subspace tracker.
//!
//! The matrix is consumed one column at a time as a partial observation;
//! multiple shuffled passes over the columns refine the column-space
//! estimate. Once the basis is frozen, each column's coefficients come from
//! one final least-squares fit, and the reconstruction is their product with
//! the basis.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{masked_cost, GrouseTracker, TrackerConfig};
use crate::error::{Error, Result};
use crate::linalg::{masked_least_squares, IndexSet, MaskedVector};

/// Keeps the tracker's basis-initialization stream distinct from the
/// column-shuffle stream derived from the same user-facing seed.
const TRACKER_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// A partially observed matrix and the run parameters for completing it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionProblem {
    n_rows: usize,
    n_cols: usize,
    rank: usize,
    passes: usize,
    shuffle_seed: u64,
    entries: Vec<(usize, usize, f64)>,
}

impl CompletionProblem {
    /// Validates shapes and the entry list: every `(row, col)` must be in
    /// range and distinct, every value finite, `1 <= rank <= min(n_rows,
    /// n_cols)`, and at least one pass and one entry.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        rank: usize,
        passes: usize,
        shuffle_seed: u64,
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix shape must be non-empty, got {n_rows}x{n_cols}"
            )));
        }
        if rank == 0 || rank > n_rows.min(n_cols) {
            return Err(Error::InvalidParameter(format!(
                "completion rank must satisfy 1 <= rank <= min(rows, cols), got {rank} for {n_rows}x{n_cols}"
            )));
        }
        if passes == 0 {
            return Err(Error::InvalidParameter(
                "completion needs at least one pass".to_string(),
            ));
        }
        if entries.is_empty() {
            return Err(Error::InvalidParameter(
                "completion needs at least one observed entry".to_string(),
            ));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for (k, &(r, c, v)) in entries.iter().enumerate() {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidIndexSet(format!(
                    "entry ({r}, {c}) out of range for a {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "completion entry values",
                    index: k,
                    value: v,
                });
            }
            if !seen.insert((r, c)) {
                return Err(Error::InvalidIndexSet(format!(
                    "duplicate entry at ({r}, {c})"
                )));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            rank,
            passes,
            shuffle_seed,
            entries,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Observed columns as masked vectors (empty supports included).
    fn columns(&self) -> Result<Vec<MaskedVector>> {
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_cols];
        for &(r, c, v) in &self.entries {
            per_col[c].push((r, v));
        }
        per_col
            .into_iter()
            .map(|mut rows| {
                rows.sort_unstable_by_key(|&(r, _)| r);
                let support = IndexSet::new(rows.iter().map(|&(r, _)| r).collect())?;
                let values = DVector::from_iterator(rows.len(), rows.iter().map(|&(_, v)| v));
                MaskedVector::new(self.n_rows, support, values)
            })
            .collect()
    }
}

/// Output of a completion run.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    /// Final orthonormal column-space estimate (`n_rows x rank`).
    pub basis: DMatrix<f64>,
    /// Per-column coefficients against the frozen basis (`rank x n_cols`);
    /// zero for columns with no observed entries.
    pub coefficients: DMatrix<f64>,
    /// `basis * coefficients` (`n_rows x n_cols`).
    pub reconstruction: DMatrix<f64>,
    /// Observed-entry root-mean-square fit after each pass, with the
    /// coefficients refit at that pass's basis.
    pub fit_history: Vec<f64>,
    /// Columns with no observed entries, in ascending order. Their
    /// reconstruction is zero and carries no information.
    pub empty_columns: Vec<usize>,
}

/// Runs the tracker over the observed columns for the configured number of
/// shuffled passes, then freezes the basis and reconstructs.
///
/// Column order is drawn from the problem's shuffle seed, one fresh
/// permutation per pass; columns with too few samples (including empty ones)
/// are presented but skipped by the tracker, so the step counter always
/// advances by `n_cols` per pass. Deterministic for identical problems and
/// configurations.
pub fn solve_completion(
    problem: &CompletionProblem,
    config: &TrackerConfig,
) -> Result<CompletionResult> {
    config.validate()?;
    let columns = problem.columns()?;
    let mut tracker = GrouseTracker::new(
        problem.n_rows,
        problem.rank,
        problem.shuffle_seed ^ TRACKER_SEED_SALT,
        config.clone(),
    )?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(problem.shuffle_seed);
    let mut order: Vec<usize> = (0..problem.n_cols).collect();
    let n_observed = problem.entries.len() as f64;

    let mut fit_history = Vec::with_capacity(problem.passes);
    for _ in 0..problem.passes {
        order.shuffle(&mut shuffle_rng);
        for &j in &order {
            tracker.step(&columns[j])?;
        }
        let mut squared = 0.0;
        for col in &columns {
            squared += masked_cost(tracker.basis(), col)?;
        }
        fit_history.push((squared / n_observed).sqrt());
    }

    let basis = tracker.basis().clone();
    let mut coefficients = DMatrix::zeros(problem.rank, problem.n_cols);
    let mut empty_columns = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        if col.sample_count() == 0 {
            empty_columns.push(j);
            continue;
        }
        let sol = masked_least_squares(&basis, col)?;
        coefficients.set_column(j, &sol.weights);
    }
    let reconstruction = &basis * &coefficients;
    Ok(CompletionResult {
        basis,
        coefficients,
        reconstruction,
        fit_history,
        empty_columns,
    })
}

/// Frobenius distance relative to the reference: `||a - b||_F / ||b||_F`.
/// The reference must be non-zero.
pub fn relative_error(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != reference.shape() {
        return Err(Error::DimensionMismatch {
            context: "relative_error shapes",
            expected: reference.nrows() * reference.ncols(),
            actual: estimate.nrows() * estimate.ncols(),
        });
    }
    let ref_norm = reference.norm();
    if ref_norm == 0.0 {
        return Err(Error::InvalidParameter(
            "relative error against a zero reference is undefined".to_string(),
        ));
    }
    Ok((estimate - reference).norm() / ref_norm)
}

/// Relative Frobenius error of the best rank-`rank` approximation of
/// `data`, from the tail of its singular value spectrum. This is the floor
/// no rank-`rank` method can beat on fully observed data.
pub fn svd_baseline_error(data: &DMatrix<f64>, rank: usize) -> Result<f64> {
    if rank == 0 || rank > data.nrows().min(data.ncols()) {
        return Err(Error::InvalidParameter(format!(
            "baseline rank must satisfy 1 <= rank <= min(rows, cols), got {rank} for {}x{}",
            data.nrows(),
            data.ncols()
        )));
    }
    let singular_values = data.clone().svd(false, false).singular_values;
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let tail: f64 = singular_values.iter().skip(rank).map(|s| s * s).sum();
    Ok((tail / total).sqrt())
}

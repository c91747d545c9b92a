//! k-cofactors local search.
//!
//! With `D = (Cᵀ Ã)⁻¹` and `M = Ã D`, moving row `i` from its cluster to
//! cluster `c` multiplies the determinant by `1 + M[i][c] - M[i][label(i)]`.
//! An assignment is therefore a local maximum exactly when it is a row
//! maximum of `M`, and reassigning every row to `idxmax(M)` is the natural
//! update. A full update is kept only when it raises the score; otherwise
//! the single best move is applied, which always does. Scores are strictly
//! increasing, so no assignment repeats.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentMatrix;
use crate::matrix::{
    determinant, idxmax, idxmax_with_reference, inverse, is_in_idxmax, ColumnSelection, DenseMatrix, MatrixError,
};

use super::{
    finalize, ClusterError, ClusteringResult, InitStrategy, SolverConfig, SolverDiagnostics, SolverTag, Termination,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KCofactorsOptions {
    pub max_iters: usize,
    pub tie_tol: f64,
}

impl Default for KCofactorsOptions {
    fn default() -> Self {
        Self { max_iters: 500, tie_tol: 1e-12 }
    }
}

/// First-order optimality evidence for an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMaxCertificate {
    /// The assignment is a row maximum of `Ã D` (within tolerance).
    pub in_idxmax: bool,
    /// Largest factor `|det'| / |det|` over all single-row moves.
    pub best_single_move_gain: f64,
    /// `(row, cluster)` of a move that raises the score beyond tolerance.
    pub improving_move: Option<(usize, usize)>,
}

impl LocalMaxCertificate {
    pub fn is_local_max(&self) -> bool {
        self.in_idxmax && self.improving_move.is_none()
    }
}

/// `idxmax(Ã - mean row)`: each point goes to the coordinate where it most
/// exceeds the average.
pub fn mean_split_init(a_tilde: &DenseMatrix) -> AssignmentMatrix {
    idxmax(&a_tilde.centered())
}

/// Uniform labels conditioned on every cluster being non-empty: a random
/// set of `k` rows seeds the clusters, the rest are drawn uniformly.
pub fn random_init<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<AssignmentMatrix, ClusterError> {
    if n < k {
        return Err(ClusterError::InvalidInit(format!("{n} rows cannot fill {k} clusters")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    Ok(AssignmentMatrix::from_labels(labels, k)?)
}

fn affinity(a_tilde: &DenseMatrix, c: &AssignmentMatrix, iteration: usize) -> Result<(f64, DenseMatrix), ClusterError> {
    let agg = c.aggregate(a_tilde);
    let singular = |e: MatrixError| match e {
        MatrixError::Singular => ClusterError::SingularIteration { iteration },
        other => other.into(),
    };
    let det = determinant(&agg)?;
    let d = inverse(&agg).map_err(singular)?;
    Ok((det, a_tilde.matmul(&d)?))
}

/// Best single move by `|1 + M[i][c] - M[i][label(i)]|`. Rows whose cluster
/// would become empty give factor 0, so the move never empties a cluster.
fn best_move(m: &DenseMatrix, c: &AssignmentMatrix) -> (f64, Option<(usize, usize)>) {
    let mut best = (f64::NEG_INFINITY, None);
    for (i, row) in m.row_iter().enumerate() {
        let cur = c.label(i);
        for (t, v) in row.iter().enumerate() {
            if t == cur {
                continue;
            }
            let gain = (1.0 + v - row[cur]).abs();
            if gain > best.0 {
                best = (gain, Some((i, t)));
            }
        }
    }
    best
}

pub fn local_max_certificate(
    a_tilde: &DenseMatrix,
    c: &AssignmentMatrix,
    tie_tol: f64,
) -> Result<LocalMaxCertificate, ClusterError> {
    let (_, m) = affinity(a_tilde, c, 0)?;
    let in_idxmax = is_in_idxmax(&m, c, tie_tol);
    let (gain, mv) = best_move(&m, c);
    let gain = if mv.is_some() { gain } else { 0.0 };
    Ok(LocalMaxCertificate {
        in_idxmax,
        best_single_move_gain: gain,
        improving_move: mv.filter(|_| gain > 1.0 + move_tol(tie_tol)),
    })
}

/// Moves must beat the current score by this factor to count as improving,
/// so rounding noise cannot keep the search alive.
fn move_tol(tie_tol: f64) -> f64 {
    tie_tol.max(1e-12)
}

/// One k-cofactors run from `init` with default tolerances.
pub fn k_cofactors(
    a_tilde: &DenseMatrix,
    init: &AssignmentMatrix,
    max_iters: usize,
) -> Result<ClusteringResult, ClusterError> {
    k_cofactors_with(a_tilde, init, &KCofactorsOptions { max_iters, ..KCofactorsOptions::default() })
}

pub fn k_cofactors_with(
    a_tilde: &DenseMatrix,
    init: &AssignmentMatrix,
    opts: &KCofactorsOptions,
) -> Result<ClusteringResult, ClusterError> {
    let k = a_tilde.cols();
    if init.n() != a_tilde.rows() || init.k() != k {
        return Err(ClusterError::InvalidInit(format!(
            "assignment {}x{} against augmented matrix {}x{}",
            init.n(),
            init.k(),
            a_tilde.rows(),
            k
        )));
    }
    if init.has_empty_cluster() {
        return Err(ClusterError::InvalidInit("a cluster is empty".into()));
    }
    let mut current = init.clone();
    let (mut det, mut m) = affinity(a_tilde, &current, 0)?;
    let mut trajectory = vec![det.abs()];
    let mut seen = HashSet::from([current.labels().to_vec()]);
    let mut termination = Termination::IterationCap { iterations: opts.max_iters };

    for iteration in 1..=opts.max_iters {
        let proposal = idxmax_with_reference(&m, &current, opts.tie_tol);
        let next = if proposal == current {
            let (gain, mv) = best_move(&m, &current);
            match mv {
                Some((i, t)) if gain > 1.0 + move_tol(opts.tie_tol) => single_move(&current, i, t),
                _ => {
                    termination = Termination::Converged { iterations: iteration - 1 };
                    break;
                }
            }
        } else {
            if proposal.has_empty_cluster() {
                return Err(ClusterError::EmptiedCluster { iteration });
            }
            let full = determinant(&proposal.aggregate(a_tilde))?.abs();
            if full > det.abs() {
                proposal
            } else {
                match best_move(&m, &current) {
                    (gain, Some((i, t))) if gain > 1.0 + move_tol(opts.tie_tol) => single_move(&current, i, t),
                    _ => {
                        termination = Termination::Converged { iterations: iteration - 1 };
                        break;
                    }
                }
            }
        };
        if !seen.insert(next.labels().to_vec()) {
            termination = Termination::Cycle { iterations: iteration };
            break;
        }
        current = next;
        (det, m) = affinity(a_tilde, &current, iteration)?;
        trajectory.push(det.abs());
    }

    let diagnostics = SolverDiagnostics {
        termination,
        score_trajectory: trajectory,
        restarts_tried: 1,
        restarts_failed: 0,
        best_restart: Some(0),
        tie_rule_overridden: false,
    };
    finalize(a_tilde, current.into_labels(), ColumnSelection::all(k), SolverTag::KCofactors, diagnostics)
}

fn single_move(c: &AssignmentMatrix, row: usize, target: usize) -> AssignmentMatrix {
    let mut labels = c.labels().to_vec();
    labels[row] = target;
    AssignmentMatrix::from_labels(labels, c.k()).expect("target is a valid label")
}

/// Per-row argmax of `ã_tc / mean_c`, the answer reported more often than
/// its average.
fn sp_seed_init(a_tilde: &DenseMatrix) -> Result<AssignmentMatrix, ClusterError> {
    let means = a_tilde.column_means();
    if let Some(c) = means.iter().position(|&m| m <= 0.0) {
        return Err(ClusterError::InvalidInit(format!("column {c} has non-positive mean")));
    }
    let inv: Vec<f64> = means.iter().map(|m| 1.0 / m).collect();
    let scaled = a_tilde.matmul(&DenseMatrix::diagonal(&inv))?;
    Ok(idxmax(&scaled))
}

/// Runs the extra inits, the configured deterministic init and
/// `restarts - 1` random inits in parallel; keeps the best score, lowest
/// run index on ties.
pub(crate) fn run_restarts(
    a_tilde: &DenseMatrix,
    config: &SolverConfig,
    extra_inits: &[Vec<usize>],
) -> Result<ClusteringResult, ClusterError> {
    let (n, k) = (a_tilde.rows(), a_tilde.cols());
    let opts = KCofactorsOptions { max_iters: config.max_iters, tie_tol: config.tie_tol };
    let fixed = extra_inits.len();
    let total = fixed + config.restarts.max(1);

    let run = |r: usize| -> Result<ClusteringResult, ClusterError> {
        let init = if r < fixed {
            AssignmentMatrix::from_labels(extra_inits[r].clone(), k)?
        } else if r == fixed {
            match config.init {
                InitStrategy::MeanSplit => mean_split_init(a_tilde),
                InitStrategy::SpSeed => sp_seed_init(a_tilde)?,
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64);
            random_init(n, k, &mut rng)?
        };
        k_cofactors_with(a_tilde, &init, &opts)
    };
    let runs: Vec<Result<ClusteringResult, ClusterError>> = (0..total).into_par_iter().map(run).collect();

    let failed = runs.iter().filter(|r| r.is_err()).count();
    let (best_index, mut best) = runs
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.ok().map(|r| (i, r)))
        .reduce(|a, b| if b.1.score > a.1.score { b } else { a })
        .ok_or(ClusterError::NoValidRun)?;
    best.diagnostics.restarts_tried = total;
    best.diagnostics.restarts_failed = failed;
    best.diagnostics.best_restart = Some(best_index);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{augment_and_pick, brute_force, dmi_score};
    use crate::fixtures;

    #[test]
    fn move_identity_matches_recomputed_determinant() {
        let a = fixtures::affine_7x2().with_ones_column();
        let c = AssignmentMatrix::from_labels(vec![0, 1, 2, 2, 2, 1, 1], 3).unwrap();
        let (det, m) = affinity(&a, &c, 0).unwrap();
        for i in 0..7 {
            for t in 0..3 {
                let moved = single_move(&c, i, t);
                let direct = determinant(&moved.aggregate(&a)).unwrap();
                let predicted = det * (1.0 + m[(i, t)] - m[(i, c.label(i))]);
                assert!((direct - predicted).abs() < 1e-12, "row {i} -> {t}");
            }
        }
    }

    #[test]
    fn scores_increase_and_end_at_local_max() {
        let a = augment_and_pick(&fixtures::kcofactors_30x2()).unwrap().matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut finished = 0;
        for _ in 0..40 {
            let init = random_init(30, 3, &mut rng).unwrap();
            let r = match k_cofactors(&a, &init, 500) {
                Err(ClusterError::EmptiedCluster { .. }) => continue,
                other => other.unwrap(),
            };
            finished += 1;
            assert!(r.diagnostics.termination.is_natural());
            for w in r.diagnostics.score_trajectory.windows(2) {
                assert!(w[1] > w[0]);
            }
            let cert = local_max_certificate(&a, &r.assignment, 1e-9).unwrap();
            assert!(cert.is_local_max(), "{cert:?}");
            assert!((dmi_score(&r.assignment, &a).unwrap() - r.score).abs() < 1e-12);
        }
        assert!(finished >= 10, "only {finished} runs finished");
    }

    #[test]
    fn restarts_reach_brute_force_optimum_on_small_input() {
        let a = fixtures::affine_7x2().with_ones_column();
        let config = SolverConfig::default();
        let r = run_restarts(&a, &config, &[]).unwrap();
        let b = brute_force(&a, 1 << 20).unwrap();
        assert!((r.score - b.score).abs() <= 1e-10 * b.score);
        assert_eq!(r.diagnostics.restarts_tried, 16);
    }

    #[test]
    fn restarts_are_deterministic() {
        let a = fixtures::dmi_20x3();
        let config = SolverConfig { seed: 11, ..SolverConfig::default() };
        let x = run_restarts(&a, &config, &[]).unwrap();
        let y = run_restarts(&a, &config, &[]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn rejects_bad_inits() {
        let a = fixtures::affine_7x2().with_ones_column();
        let empty = AssignmentMatrix::from_labels(vec![0, 0, 0, 1, 1, 1, 1], 3).unwrap();
        assert!(matches!(k_cofactors(&a, &empty, 10), Err(ClusterError::InvalidInit(_))));
        let short = AssignmentMatrix::from_labels(vec![0, 1, 2], 3).unwrap();
        assert!(matches!(k_cofactors(&a, &short, 10), Err(ClusterError::InvalidInit(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_init(2, 3, &mut rng).is_err());
    }
}

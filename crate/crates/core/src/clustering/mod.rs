//! Determinant-maximization clustering.
//!
//! The rows of `A` (n x d) are clustered by appending an all-ones column,
//! keeping `k = rank([A 1])` linearly independent columns (`Ã`), and
//! searching for the one-hot assignment `C` that maximizes `|det(Cᵀ Ã)|`,
//! the DMI-score. Because any invertible affine map of the points multiplies
//! every score by the same constant, the optimum does not depend on the
//! coordinate system the points are expressed in.
//!
//! Solvers:
//! - [`solve_exact_1d`]: two clusters split at the mean (k = 2).
//! - [`solve_exact_2d`]: enumeration of wedge partitions around the mean (k = 3).
//! - [`k_cofactors`]: alternating assignment/update local search, any k.
//! - [`brute_force`]: exhaustive search, small n only.
//!
//! [`dmi_cluster`] picks among them.

mod brute;
mod exact;
mod kcofactors;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{AssignmentError, AssignmentMatrix};
use crate::matrix::{
    self, determinant, inverse, numerical_rank, pick_independent_columns, rank_tolerance, ColumnSelection, DenseMatrix,
    MatrixError,
};

pub use brute::{brute_force, brute_force_optima, BruteForceOptima};
pub use exact::{solve_exact_1d, solve_exact_2d};
pub use kcofactors::{
    k_cofactors, k_cofactors_with, local_max_certificate, mean_split_init, random_init, KCofactorsOptions,
    LocalMaxCertificate,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input has no nonzero-score clustering")]
    DegenerateInput,
    #[error("all values are identical")]
    AllEqual,
    #[error("points are collinear after centering")]
    DegenerateRank,
    #[error("cluster aggregate became singular at iteration {iteration}")]
    SingularIteration { iteration: usize },
    #[error("assignment step emptied a cluster at iteration {iteration}")]
    EmptiedCluster { iteration: usize },
    #[error("invalid initial assignment: {0}")]
    InvalidInit(String),
    #[error("{assignments:.3e} assignments exceed the brute-force cap of {cap}")]
    TooLarge { assignments: f64, cap: u64 },
    #[error("no restart produced a valid local maximum")]
    NoValidRun,
}

/// Which solver [`dmi_cluster`] should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Exact closed forms for k <= 3, k-cofactors with restarts above.
    #[default]
    Auto,
    /// Brute force when under the cap, otherwise the exact low-dimensional
    /// solvers; fails with `TooLarge` when neither applies.
    Exact,
    /// Always k-cofactors.
    KCofactors,
    /// Always brute force.
    BruteForce,
}

/// Initialization recipe for the first k-cofactors run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// `idxmax(Ã - mean row)`.
    #[default]
    MeanSplit,
    /// Per-row surprisingly-popular answer of `Ã` (only meaningful when the
    /// columns of `Ã` are answer options).
    SpSeed,
}

/// Every tunable of the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Total k-cofactors runs, including the deterministic first one.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Relative rank tolerance (scaled by the largest absolute entry).
    pub rank_tol: f64,
    /// Relative tolerance under which an assignment counts as a row maximum.
    pub tie_tol: f64,
    /// Largest `k^n` brute force will attempt.
    pub brute_force_cap: u64,
    pub init: InitStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolverMode::Auto,
            restarts: 16,
            seed: 0,
            max_iters: 500,
            rank_tol: matrix::DEFAULT_RANK_TOL,
            tie_tol: 1e-12,
            brute_force_cap: 2_000_000,
            init: InitStrategy::MeanSplit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverTag {
    Exact1d,
    Exact2d,
    KCofactors,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Termination {
    /// Closed-form or exhaustive solver.
    Exact,
    /// The assignment is a row maximum of `Ã D`.
    Converged {
        iterations: usize,
    },
    IterationCap {
        iterations: usize,
    },
    /// An assignment repeated; cannot happen while scores strictly increase.
    Cycle {
        iterations: usize,
    },
}

impl Termination {
    pub fn is_natural(&self) -> bool {
        matches!(self, Termination::Exact | Termination::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub termination: Termination,
    /// DMI-score after every accepted k-cofactors step (first entry is the
    /// initial assignment).
    pub score_trajectory: Vec<f64>,
    pub restarts_tried: usize,
    pub restarts_failed: usize,
    /// Index of the winning restart.
    pub best_restart: Option<usize>,
    /// Set when the 1d mean-split tie rule lost to the alternative placement.
    pub tie_rule_overridden: bool,
}

impl SolverDiagnostics {
    pub(crate) fn exact() -> Self {
        Self {
            termination: Termination::Exact,
            score_trajectory: Vec::new(),
            restarts_tried: 0,
            restarts_failed: 0,
            best_restart: None,
            tie_rule_overridden: false,
        }
    }
}

/// Outcome of a DMI clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    /// Columns of `[A 1]` kept in `Ã`.
    pub picked_columns: ColumnSelection,
    /// Canonically ordered assignment.
    pub assignment: AssignmentMatrix,
    /// `(Cᵀ Ã)⁻¹`; column `c` scores every point's affinity to cluster `c`.
    pub partition: DenseMatrix,
    /// `|det(Cᵀ Ã)|`.
    pub score: f64,
    pub solver_tag: SolverTag,
    pub diagnostics: SolverDiagnostics,
}

impl ClusteringResult {
    /// `idxmax(X D*)` for new rows `X` expressed in the picked columns.
    pub fn classify(&self, rows: &DenseMatrix) -> Result<AssignmentMatrix, ClusterError> {
        let scores = rows.matmul(&self.partition)?;
        Ok(matrix::idxmax(&scores))
    }
}

/// `Ã` together with the picked column indices and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub matrix: DenseMatrix,
    pub columns: ColumnSelection,
    pub k: usize,
}

pub fn augment_and_pick(a: &DenseMatrix) -> Result<Augmented, ClusterError> {
    augment_and_pick_with_tol(a, matrix::DEFAULT_RANK_TOL)
}

pub fn augment_and_pick_with_tol(a: &DenseMatrix, rank_tol: f64) -> Result<Augmented, ClusterError> {
    let full = a.with_ones_column();
    let tol = rank_tolerance(&full, rank_tol);
    let k = numerical_rank(&full, tol);
    if k == 0 {
        return Err(ClusterError::DegenerateInput);
    }
    let columns = pick_independent_columns(&full, k, tol)?;
    let matrix = full.select_columns(columns.indices())?;
    Ok(Augmented { matrix, columns, k })
}

/// `|det(Cᵀ Ã)|`; zero whenever a cluster is empty.
pub fn dmi_score(c: &AssignmentMatrix, a_tilde: &DenseMatrix) -> Result<f64, ClusterError> {
    if c.n() != a_tilde.rows() || c.k() != a_tilde.cols() {
        return Err(ClusterError::ShapeMismatch(format!(
            "assignment {}x{} against augmented matrix {}x{}",
            c.n(),
            c.k(),
            a_tilde.rows(),
            a_tilde.cols()
        )));
    }
    if c.has_empty_cluster() {
        return Ok(0.0);
    }
    Ok(determinant(&c.aggregate(a_tilde))?.abs())
}

/// Canonicalizes `labels` and assembles the result against `Ã`.
pub(crate) fn finalize(
    a_tilde: &DenseMatrix,
    labels: Vec<usize>,
    picked_columns: ColumnSelection,
    solver_tag: SolverTag,
    diagnostics: SolverDiagnostics,
) -> Result<ClusteringResult, ClusterError> {
    let k = a_tilde.cols();
    let assignment = AssignmentMatrix::from_labels(labels, k)?.canonical();
    if assignment.has_empty_cluster() {
        return Err(ClusterError::DegenerateInput);
    }
    let aggregate = assignment.aggregate(a_tilde);
    let score = determinant(&aggregate)?.abs();
    let partition = inverse(&aggregate).map_err(|e| match e {
        MatrixError::Singular => ClusterError::DegenerateInput,
        other => other.into(),
    })?;
    Ok(ClusteringResult { k, picked_columns, assignment, partition, score, solver_tag, diagnostics })
}

/// Full DMI clustering of the rows of `a`.
pub fn dmi_cluster(a: &DenseMatrix, config: &SolverConfig) -> Result<ClusteringResult, ClusterError> {
    dmi_cluster_with_inits(a, config, &[])
}

/// As [`dmi_cluster`], with extra k-cofactors starting points tried before
/// the configured ones. Labels must lie in `0..k`.
pub fn dmi_cluster_with_inits(
    a: &DenseMatrix,
    config: &SolverConfig,
    extra_inits: &[Vec<usize>],
) -> Result<ClusteringResult, ClusterError> {
    let aug = augment_and_pick_with_tol(a, config.rank_tol)?;
    cluster_augmented(&aug, config, extra_inits)
}

/// Solves an already augmented problem. Reported column indices refer to
/// `[A 1]`.
pub fn cluster_augmented(
    aug: &Augmented,
    config: &SolverConfig,
    extra_inits: &[Vec<usize>],
) -> Result<ClusteringResult, ClusterError> {
    let a_tilde = &aug.matrix;
    let n = a_tilde.rows();
    let k = aug.k;
    let mut result = if k == 1 {
        // A single cluster is the only (hence exhaustive) candidate.
        finalize(a_tilde, vec![0; n], ColumnSelection::all(1), SolverTag::BruteForce, SolverDiagnostics::exact())?
    } else {
        let under_cap = brute::assignment_count(n, k) <= config.brute_force_cap as f64;
        match config.mode {
            SolverMode::BruteForce => brute_force(a_tilde, config.brute_force_cap)?,
            SolverMode::Exact if under_cap => brute_force(a_tilde, config.brute_force_cap)?,
            SolverMode::Exact if k <= 3 => exact::solve_low_dimensional(a_tilde, config)?,
            SolverMode::Exact => {
                return Err(ClusterError::TooLarge {
                    assignments: brute::assignment_count(n, k),
                    cap: config.brute_force_cap,
                })
            }
            SolverMode::Auto if k <= 3 => exact::solve_low_dimensional(a_tilde, config)?,
            SolverMode::Auto | SolverMode::KCofactors => kcofactors::run_restarts(a_tilde, config, extra_inits)?,
        }
    };
    result.picked_columns = aug.columns.clone();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn augment_examples() {
        let aug = augment_and_pick(&fixtures::affine_7x2()).unwrap();
        assert_eq!(aug.k, 3);
        assert_eq!(aug.columns.indices(), &[0, 1, 2]);
        assert_eq!(aug.matrix, fixtures::affine_7x2().with_ones_column());

        let same = DenseMatrix::from_rows(&vec![vec![2.0, -1.0]; 4]).unwrap();
        let aug = augment_and_pick(&same).unwrap();
        assert_eq!(aug.k, 1);

        let rs = fixtures::dmi_20x3();
        let aug = augment_and_pick(&rs).unwrap();
        assert_eq!((aug.k, aug.columns.indices()), (3, &[0usize, 1, 2][..]));
        assert_eq!(aug.matrix, rs);
    }

    #[test]
    fn single_cluster_when_rows_identical() {
        let same = DenseMatrix::from_rows(&vec![vec![2.0, -1.0]; 4]).unwrap();
        let r = dmi_cluster(&same, &SolverConfig::default()).unwrap();
        assert_eq!(r.k, 1);
        assert_eq!(r.assignment.labels(), &[0, 0, 0, 0]);
        assert_eq!(r.score, 8.0);
    }

    #[test]
    fn empty_cluster_scores_zero() {
        let a = fixtures::affine_7x2().with_ones_column();
        let c = AssignmentMatrix::from_labels(vec![0, 0, 1, 1, 0, 1, 0], 3).unwrap();
        assert_eq!(dmi_score(&c, &a).unwrap(), 0.0);
        let wrong = AssignmentMatrix::from_labels(vec![0; 7], 2).unwrap();
        assert!(matches!(dmi_score(&wrong, &a), Err(ClusterError::ShapeMismatch(_))));
    }

    #[test]
    fn four_points_on_a_line_split_at_mean() {
        // Enumerate all 2^4 assignments of {1,2,3,4}.
        let a = DenseMatrix::column(&[1.0, 2.0, 3.0, 4.0]).unwrap().with_ones_column();
        let mut best = (0.0, vec![]);
        for mask in 0u32..16 {
            let labels: Vec<usize> = (0..4).map(|i| ((mask >> i) & 1) as usize).collect();
            let c = AssignmentMatrix::from_labels(labels.clone(), 2).unwrap();
            let s = dmi_score(&c, &a).unwrap();
            if s > best.0 {
                best = (s, labels);
            }
        }
        let split = AssignmentMatrix::from_labels(vec![1, 1, 0, 0], 2).unwrap();
        assert_eq!(dmi_score(&split, &a).unwrap(), best.0);
        // 4 * (3 + 4 - 2*2.5) = 8
        assert!((best.0 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn mean_lies_on_every_partition_boundary() {
        let r = dmi_cluster(&fixtures::kcofactors_30x2(), &SolverConfig::default()).unwrap();
        let aug = augment_and_pick(&fixtures::kcofactors_30x2()).unwrap();
        let mean = DenseMatrix::from_rows(&[aug.matrix.column_means()]).unwrap();
        let proj = mean.matmul(&r.partition).unwrap();
        let n = aug.matrix.rows() as f64;
        for v in proj.row(0) {
            assert!((v - 1.0 / n).abs() < 1e-8 / n, "{v}");
        }
    }
}

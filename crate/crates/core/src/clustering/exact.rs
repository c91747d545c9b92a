//! Exact solvers for one and two effective dimensions.
//!
//! With k = 2 the score of a split is proportional to the sum of the
//! centered values on one side, so the optimum puts everything above the
//! mean in one cluster. With k = 3 every local maximum is cut by three rays
//! leaving the global mean, so the clusters are contiguous arcs of the
//! points sorted by angle around the mean; enumerating all cut triples of
//! that circular order is exhaustive.

use crate::assignment::AssignmentMatrix;
use crate::matrix::{
    determinant, numerical_rank, pick_independent_columns, rank_tolerance, ColumnSelection, DenseMatrix,
};

use super::{dmi_score, finalize, ClusterError, ClusteringResult, SolverConfig, SolverDiagnostics, SolverTag};

/// Values within this relative distance of the mean count as "at" the mean.
const AT_MEAN_TOL: f64 = 1e-12;

/// Relative margin the alternative placement of at-mean values must win by
/// before the default tie rule is overridden.
const TIE_OVERRIDE_MARGIN: f64 = 1e-9;

/// Cluster 0 holds values above the mean, cluster 1 the rest. Values at the
/// mean join cluster 1 unless moving them to cluster 0 scores strictly
/// better against `a_tilde`.
fn mean_split_labels(values: &[f64], a_tilde: &DenseMatrix) -> Result<(Vec<usize>, bool), ClusterError> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let scale = values.iter().fold(0.0f64, |s, v| s.max((v - mean).abs()));
    if scale == 0.0 {
        return Err(ClusterError::AllEqual);
    }
    let at_mean: Vec<usize> =
        values.iter().enumerate().filter(|(_, v)| (*v - mean).abs() <= AT_MEAN_TOL * scale).map(|(i, _)| i).collect();
    let labels: Vec<usize> =
        values.iter().enumerate().map(|(i, v)| usize::from(!(*v > mean && !at_mean.contains(&i)))).collect();
    if at_mean.is_empty() {
        return Ok((labels, false));
    }
    let mut alt = labels.clone();
    for &i in &at_mean {
        alt[i] = 0;
    }
    let rule = dmi_score(&AssignmentMatrix::from_labels(labels.clone(), 2)?, a_tilde)?;
    let other = dmi_score(&AssignmentMatrix::from_labels(alt.clone(), 2)?, a_tilde)?;
    if other > rule * (1.0 + TIE_OVERRIDE_MARGIN) {
        Ok((alt, true))
    } else {
        Ok((labels, false))
    }
}

/// Two-cluster DMI clustering of scalars: above the mean versus the rest.
pub fn solve_exact_1d(values: &[f64]) -> Result<ClusteringResult, ClusterError> {
    if values.len() < 2 {
        return Err(ClusterError::AllEqual);
    }
    let a_tilde = DenseMatrix::column(values)?.with_ones_column();
    let (labels, overridden) = mean_split_labels(values, &a_tilde)?;
    let mut diagnostics = SolverDiagnostics::exact();
    diagnostics.tie_rule_overridden = overridden;
    finalize(&a_tilde, labels, ColumnSelection::all(2), SolverTag::Exact1d, diagnostics)
}

/// Three-cluster DMI clustering of 2d points by wedge enumeration.
///
/// When the centered points are collinear the problem is one-dimensional;
/// with `allow_fallback` it is then solved by [`solve_exact_1d`] on the
/// coordinate with the larger spread, otherwise `DegenerateRank` is
/// returned.
pub fn solve_exact_2d(a: &DenseMatrix, allow_fallback: bool) -> Result<ClusteringResult, ClusterError> {
    if a.cols() != 2 {
        return Err(ClusterError::ShapeMismatch(format!("expected n x 2 points, got {} columns", a.cols())));
    }
    let centered = a.centered();
    let tol = rank_tolerance(&a.with_ones_column(), crate::matrix::DEFAULT_RANK_TOL);
    if numerical_rank(&centered, tol) < 2 {
        if !allow_fallback {
            return Err(ClusterError::DegenerateRank);
        }
        let spread = |c: usize| centered.col_values(c).iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let col = if spread(1) > spread(0) { 1 } else { 0 };
        return solve_exact_1d(&a.col_values(col));
    }
    let a_tilde = a.with_ones_column();
    let labels = wedge_search(&a_tilde, &centered);
    finalize(&a_tilde, labels, ColumnSelection::all(3), SolverTag::Exact2d, SolverDiagnostics::exact())
}

/// Exact solve of an augmented problem with k = 2 or 3.
pub(crate) fn solve_low_dimensional(
    a_tilde: &DenseMatrix,
    config: &SolverConfig,
) -> Result<ClusteringResult, ClusterError> {
    let k = a_tilde.cols();
    let centered = a_tilde.centered();
    let n_cols = ColumnSelection::all(k);
    match k {
        2 => {
            // Centered columns are all multiples of one direction.
            let norm = |c: usize| centered.col_values(c).iter().map(|v| v * v).sum::<f64>();
            let col = (0..k).max_by(|&x, &y| norm(x).total_cmp(&norm(y))).expect("k = 2");
            let values = a_tilde.col_values(col);
            let (labels, overridden) = mean_split_labels(&values, a_tilde)?;
            let mut diagnostics = SolverDiagnostics::exact();
            diagnostics.tie_rule_overridden = overridden;
            finalize(a_tilde, labels, n_cols, SolverTag::Exact1d, diagnostics)
        }
        3 => {
            let tol = rank_tolerance(a_tilde, config.rank_tol);
            let coords_cols = pick_independent_columns(&centered, 2, tol)?;
            let coords = centered.select_columns(coords_cols.indices())?;
            let labels = wedge_search(a_tilde, &coords);
            finalize(a_tilde, labels, n_cols, SolverTag::Exact2d, SolverDiagnostics::exact())
        }
        _ => Err(ClusterError::ShapeMismatch(format!("exact solver needs k in 2..=3, got {k}"))),
    }
}

fn det3(r: [[f64; 3]; 3]) -> f64 {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Best partition of the rows of `a_tilde` (n x 3) into three angular arcs
/// of `coords` (n x 2, centered at the mean).
///
/// Points sharing an angle are ordered by radius, so cuts may separate
/// them. Points sitting at the mean are tied for every cluster; they are
/// kept together and tried in each of the three arcs.
fn wedge_search(a_tilde: &DenseMatrix, coords: &DenseMatrix) -> Vec<usize> {
    let n = a_tilde.rows();
    let scale = coords.max_abs();
    let row3 = |i: usize| {
        let r = a_tilde.row(i);
        [r[0], r[1], r[2]]
    };
    let mut at_mean = Vec::new();
    let mut ring: Vec<(f64, f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let (x, y) = (coords[(i, 0)], coords[(i, 1)]);
        let radius = x.hypot(y);
        if radius <= AT_MEAN_TOL * scale {
            at_mean.push(i);
        } else {
            ring.push((y.atan2(x), radius, i));
        }
    }
    ring.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let m = ring.len();
    debug_assert!(m >= 3, "rank-2 centered points leave at least three off the mean");

    let mut prefix = vec![[0.0; 3]; m + 1];
    for (p, &(_, _, i)) in ring.iter().enumerate() {
        prefix[p + 1] = add3(prefix[p], row3(i));
    }
    let centre_sum = at_mean.iter().fold([0.0; 3], |s, &i| add3(s, row3(i)));
    let total = prefix[m];
    let placements: &[Option<usize>] = if at_mean.is_empty() { &[None] } else { &[Some(0), Some(1), Some(2)] };

    let mut best = (f64::NEG_INFINITY, 0, 1, 2, None);
    for i in 0..m {
        for j in i + 1..m {
            let arc0 = sub3(prefix[j], prefix[i]);
            for l in j + 1..m {
                let arc1 = sub3(prefix[l], prefix[j]);
                let arc2 = sub3(sub3(total, arc0), arc1);
                for &place in placements {
                    let mut rows = [arc0, arc1, arc2];
                    if let Some(p) = place {
                        rows[p] = add3(rows[p], centre_sum);
                    }
                    let s = det3(rows).abs();
                    if s > best.0 {
                        best = (s, i, j, l, place);
                    }
                }
            }
        }
    }
    let (_, i, j, l, place) = best;
    let mut labels = vec![0; n];
    for (p, &(_, _, idx)) in ring.iter().enumerate() {
        labels[idx] = if (i..j).contains(&p) {
            0
        } else if (j..l).contains(&p) {
            1
        } else {
            2
        };
    }
    for &idx in &at_mean {
        labels[idx] = place.unwrap_or(0);
    }
    debug_assert!(determinant(&AssignmentMatrix::from_labels(labels.clone(), 3).unwrap().aggregate(a_tilde)).is_ok());
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::brute_force;
    use crate::fixtures;

    fn members(r: &ClusteringResult) -> Vec<Vec<usize>> {
        let mut m: Vec<Vec<usize>> = (0..r.k).map(|c| r.assignment.members(c)).collect();
        m.sort();
        m
    }

    #[test]
    fn one_dimensional_examples() {
        let r = solve_exact_1d(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(members(&r), vec![vec![0, 1], vec![2, 3]]);
        let r = solve_exact_1d(&[0.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!(members(&r), vec![vec![0, 1, 2], vec![3]]);
        let r = solve_exact_1d(&[-1.0, 1.0]).unwrap();
        assert_eq!(members(&r), vec![vec![0], vec![1]]);
        assert!(matches!(solve_exact_1d(&[3.0, 3.0, 3.0]), Err(ClusterError::AllEqual)));
    }

    #[test]
    fn value_at_mean_joins_lower_cluster_and_ties() {
        // {-1, 0, 1}: the score is n * (sum of centered values above), so the
        // 0 contributes nothing and both placements tie exactly.
        let values = [-1.0, 1.0, 0.0];
        let r = solve_exact_1d(&values).unwrap();
        assert!(!r.diagnostics.tie_rule_overridden);
        let lower = r.assignment.label(0);
        assert_eq!(r.assignment.label(2), lower);
        assert_ne!(r.assignment.label(1), lower);

        let a = DenseMatrix::column(&values).unwrap().with_ones_column();
        let alt = AssignmentMatrix::from_labels(vec![1, 0, 0], 2).unwrap();
        assert!((dmi_score(&alt, &a).unwrap() - r.score).abs() < 1e-12);
        assert!((brute_force(&a, 1000).unwrap().score - r.score).abs() < 1e-12);
    }

    #[test]
    fn three_points_are_singletons() {
        let a = DenseMatrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
        let r = solve_exact_2d(&a, false).unwrap();
        assert_eq!(members(&r), vec![vec![0], vec![1], vec![2]]);
        // |det[[0,0,1],[2,0,1],[0,1,1]]| = 2 = twice the triangle area.
        assert!((r.score - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fixture_7x2_matches_brute_force() {
        let a = fixtures::affine_7x2();
        let exact = solve_exact_2d(&a, false).unwrap();
        let brute = brute_force(&a.with_ones_column(), 10_000).unwrap();
        assert!((exact.score - brute.score).abs() <= 1e-10 * brute.score);
        assert_eq!(exact.assignment, brute.assignment);
    }

    #[test]
    fn collinear_points_fall_back_or_fail() {
        let a = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [5.0, 10.0]]).unwrap();
        assert!(matches!(solve_exact_2d(&a, false), Err(ClusterError::DegenerateRank)));
        let r = solve_exact_2d(&a, true).unwrap();
        assert_eq!(r.solver_tag, SolverTag::Exact1d);
        assert_eq!(members(&r), vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn point_at_mean_is_placed_optimally() {
        // Square corners plus its centre.
        let a = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]).unwrap();
        let exact = solve_exact_2d(&a, false).unwrap();
        let brute = brute_force(&a.with_ones_column(), 10_000).unwrap();
        assert!((exact.score - brute.score).abs() <= 1e-10 * brute.score);
    }
}

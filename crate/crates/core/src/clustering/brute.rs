//! Exhaustive search over set partitions into exactly k blocks.

use crate::assignment::AssignmentMatrix;
use crate::matrix::{ColumnSelection, DenseMatrix};

use super::{finalize, ClusterError, ClusteringResult, SolverDiagnostics, SolverTag};

/// Size of the raw assignment space, `k^n`, used for the cap check.
pub(crate) fn assignment_count(n: usize, k: usize) -> f64 {
    (k as f64).powf(n as f64)
}

/// All optimal partitions found by [`brute_force_optima`].
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOptima {
    pub score: f64,
    /// Canonical assignments whose score is within the relative tolerance
    /// of `score`, in enumeration order.
    pub optima: Vec<AssignmentMatrix>,
}

/// In-place LU determinant of a row-major `k x k` scratch buffer.
fn det_in_place(m: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let pivot =
            (col..k).max_by(|&a, &b| m[a * k + col].abs().total_cmp(&m[b * k + col].abs())).expect("non-empty range");
        if m[pivot * k + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..k {
                m.swap(col * k + j, pivot * k + j);
            }
            det = -det;
        }
        let p = m[col * k + col];
        det *= p;
        for r in col + 1..k {
            let f = m[r * k + col] / p;
            if f != 0.0 {
                for j in col..k {
                    m[r * k + j] -= f * m[col * k + j];
                }
            }
        }
    }
    det
}

/// Depth-first walk of restricted-growth strings: row `i` may join any block
/// already opened or open the next one. Each set partition is visited once.
struct Walker<'a, F: FnMut(&[usize], f64)> {
    a: &'a DenseMatrix,
    k: usize,
    labels: Vec<usize>,
    sums: Vec<f64>,
    scratch: Vec<f64>,
    visit: F,
}

impl<F: FnMut(&[usize], f64)> Walker<'_, F> {
    fn step(&mut self, i: usize, opened: usize) {
        let n = self.a.rows();
        let k = self.k;
        if i == n {
            if opened == k {
                self.scratch.copy_from_slice(&self.sums);
                let s = det_in_place(&mut self.scratch, k).abs();
                (self.visit)(&self.labels, s);
            }
            return;
        }
        // Every unopened block still needs a row.
        if k - opened > n - i {
            return;
        }
        let last = if opened < k { opened } else { k - 1 };
        for b in 0..=last {
            self.labels[i] = b;
            for (s, v) in self.sums[b * k..(b + 1) * k].iter_mut().zip(self.a.row(i)) {
                *s += v;
            }
            self.step(i + 1, opened.max(b + 1));
            for (s, v) in self.sums[b * k..(b + 1) * k].iter_mut().zip(self.a.row(i)) {
                *s -= v;
            }
        }
    }
}

fn walk(a_tilde: &DenseMatrix, cap: u64, visit: impl FnMut(&[usize], f64)) -> Result<(), ClusterError> {
    let (n, k) = (a_tilde.rows(), a_tilde.cols());
    let count = assignment_count(n, k);
    if count > cap as f64 {
        return Err(ClusterError::TooLarge { assignments: count, cap });
    }
    if n < k {
        return Err(ClusterError::DegenerateInput);
    }
    let mut w = Walker { a: a_tilde, k, labels: vec![0; n], sums: vec![0.0; k * k], scratch: vec![0.0; k * k], visit };
    w.step(0, 0);
    Ok(())
}

/// The DMI-optimal assignment of the rows of `Ã` by exhaustive search.
/// Among exact ties the first partition in enumeration order wins.
pub fn brute_force(a_tilde: &DenseMatrix, cap: u64) -> Result<ClusteringResult, ClusterError> {
    let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, Vec::new());
    walk(a_tilde, cap, |labels, s| {
        if s > best.0 {
            best = (s, labels.to_vec());
        }
    })?;
    if best.0 <= 0.0 {
        return Err(ClusterError::DegenerateInput);
    }
    let k = a_tilde.cols();
    finalize(a_tilde, best.1, ColumnSelection::all(k), SolverTag::BruteForce, SolverDiagnostics::exact())
}

/// Every partition whose score is within `rel_tol` of the optimum.
pub fn brute_force_optima(a_tilde: &DenseMatrix, cap: u64, rel_tol: f64) -> Result<BruteForceOptima, ClusterError> {
    let mut best = 0.0f64;
    let mut candidates: Vec<(f64, Vec<usize>)> = Vec::new();
    walk(a_tilde, cap, |labels, s| {
        if s >= best * (1.0 - rel_tol) && s > 0.0 {
            best = best.max(s);
            candidates.push((s, labels.to_vec()));
        }
    })?;
    if best <= 0.0 {
        return Err(ClusterError::DegenerateInput);
    }
    let k = a_tilde.cols();
    let optima = candidates
        .into_iter()
        .filter(|(s, _)| *s >= best * (1.0 - rel_tol))
        .map(|(_, l)| AssignmentMatrix::from_labels(l, k).map(|c| c.canonical()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BruteForceOptima { score: best, optima })
}

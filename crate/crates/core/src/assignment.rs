//! Hard (one-hot) cluster assignments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignmentError {
    #[error("label {label} at row {row} is out of range for {k} clusters")]
    LabelOutOfRange { row: usize, label: usize, k: usize },
    #[error("an assignment needs at least one row and one cluster")]
    Empty,
    #[error("row {row} is not one-hot")]
    NotOneHot { row: usize },
}

/// One-hot `n x k` matrix stored as one cluster label per row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    labels: Vec<usize>,
    k: usize,
}

impl AssignmentMatrix {
    pub fn from_labels(labels: Vec<usize>, k: usize) -> Result<Self, AssignmentError> {
        if labels.is_empty() || k == 0 {
            return Err(AssignmentError::Empty);
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(AssignmentError::LabelOutOfRange { row, label, k });
        }
        Ok(Self { labels, k })
    }

    /// Reads a dense 0-1 matrix; every row must contain exactly one 1.
    pub fn from_dense(m: &DenseMatrix) -> Result<Self, AssignmentError> {
        let labels = m
            .row_iter()
            .enumerate()
            .map(|(row, r)| {
                let ones: Vec<usize> = r.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(c, _)| c).collect();
                let zeros = r.iter().filter(|&&v| v == 0.0).count();
                if ones.len() == 1 && zeros + 1 == r.len() {
                    Ok(ones[0])
                } else {
                    Err(AssignmentError::NotOneHot { row })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_labels(labels, m.cols())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn has_empty_cluster(&self) -> bool {
        self.cluster_sizes().contains(&0)
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == cluster).map(|(i, _)| i).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n(), self.k);
        for (r, &l) in self.labels.iter().enumerate() {
            m[(r, l)] = 1.0;
        }
        m
    }

    /// `Cᵀ M` computed by summing the rows of each cluster.
    pub fn aggregate(&self, m: &DenseMatrix) -> DenseMatrix {
        assert_eq!(m.rows(), self.n(), "assignment/matrix row count");
        let mut out = DenseMatrix::zeros(self.k, m.cols());
        for (r, &l) in self.labels.iter().enumerate() {
            for (o, v) in out.row_mut(l).iter_mut().zip(m.row(r)) {
                *o += v;
            }
        }
        out
    }

    /// Relabels columns through `perm`: old cluster `c` becomes `perm[c]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.k);
        Self { labels: self.labels.iter().map(|&l| perm[l]).collect(), k: self.k }
    }

    pub fn restricted(&self, rows: &[usize]) -> Self {
        Self { labels: rows.iter().map(|&r| self.labels[r]).collect(), k: self.k }
    }

    /// Canonical column order: clusters sorted by size (descending), then by
    /// their smallest member index. Empty clusters go last.
    pub fn canonical(&self) -> Self {
        let perm = canonical_permutation(&self.labels, self.k);
        self.permuted(&perm)
    }

    /// Equal as partitions of the rows, ignoring column labels.
    pub fn same_partition(&self, other: &Self) -> bool {
        self.n() == other.n() && self.canonical().labels == other.canonical().labels
    }
}

/// Maps each old label to its canonical position.
pub(crate) fn canonical_permutation(labels: &[usize], k: usize) -> Vec<usize> {
    let mut size = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &l) in labels.iter().enumerate() {
        size[l] += 1;
        first[l] = first[l].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(first[a].cmp(&first[b])));
    let mut perm = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    perm
}

/// Canonical relabeling of a plain label vector.
pub fn canonical_labels(labels: &[usize], k: usize) -> Vec<usize> {
    let perm = canonical_permutation(labels, k);
    labels.iter().map(|&l| perm[l]).collect()
}

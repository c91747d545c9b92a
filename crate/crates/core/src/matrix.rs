//! Small dense linear algebra: determinant, inverse, numerical rank,
//! independent-column selection and row-argmax extraction.
//!
//! Everything here is sized for the cluster counts the solvers work with
//! (k rarely above 10), so plain row-major storage and partial-pivoted
//! elimination are all that is needed.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::AssignmentMatrix;

/// Relative tolerance used by [`numerical_rank_default`]. Loose enough
/// that data published to eight decimals still counts as row-stochastic.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// `|det| < DEFAULT_SINGULAR_TOL * scale^k` is treated as singular, where
/// `scale` is the largest absolute entry.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("expected {expected} entries for the requested shape, got {found}")]
    EntryCount { expected: usize, found: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("ragged rows: row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("expected rank {expected}, found {found} independent columns")]
    RankMismatch { expected: usize, found: usize },
}

/// Real-valued matrix in row-major order. All entries are finite.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = MatrixError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        DenseMatrix::from_rows(&rows)
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.to_rows()
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::Empty { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(MatrixError::EntryCount { expected: rows * cols, found: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(MatrixError::Ragged { row: i, expected: d, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    /// Column vector from a slice.
    pub fn column(values: &[f64]) -> Result<Self, MatrixError> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zeros: empty shape");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn col_values(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.row_iter().map(<[f64]>::to_vec).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::ShapeMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(r).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::ShapeMismatch("elementwise subtraction".into()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Adds `offset` to every row (the row-broadcast `A + b`).
    pub fn add_row_vector(&self, offset: &[f64]) -> Result<Self, MatrixError> {
        if offset.len() != self.cols {
            return Err(MatrixError::ShapeMismatch(format!(
                "row vector of length {} against {} columns",
                offset.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for (v, b) in out.row_mut(r).iter_mut().zip(offset) {
                *v += b;
            }
        }
        Ok(out)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for row in self.row_iter() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.rows as f64;
        self.column_means().into_iter().map(|m| m * n).collect()
    }

    /// Subtracts the mean row from every row.
    pub fn centered(&self) -> Self {
        let means = self.column_means();
        let neg: Vec<f64> = means.iter().map(|m| -m).collect();
        self.add_row_vector(&neg).expect("same width")
    }

    /// `[self 1]`: appends an all-ones column.
    pub fn with_ones_column(&self) -> Self {
        let mut data = Vec::with_capacity(self.rows * (self.cols + 1));
        for row in self.row_iter() {
            data.extend_from_slice(row);
            data.push(1.0);
        }
        Self { rows: self.rows, cols: self.cols + 1, data }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self, MatrixError> {
        if cols.is_empty() {
            return Err(MatrixError::Empty { rows: self.rows, cols: 0 });
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(MatrixError::ShapeMismatch(format!("column {bad} out of range for {} columns", self.cols)));
        }
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for row in self.row_iter() {
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Self::new(self.rows, cols.len(), data)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, MatrixError> {
        if rows.is_empty() {
            return Err(MatrixError::Empty { rows: 0, cols: self.cols });
        }
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            if r >= self.rows {
                return Err(MatrixError::ShapeMismatch(format!("row {r} out of range for {} rows", self.rows)));
            }
            data.extend_from_slice(self.row(r));
        }
        Self::new(rows.len(), self.cols, data)
    }

    /// Divides every row by its sum. Rows summing to zero are left as-is
    /// and reported by index.
    pub fn row_normalized(&self) -> (Self, Vec<usize>) {
        let mut out = self.clone();
        let mut zero_rows = Vec::new();
        for r in 0..out.rows {
            let s: f64 = out.row(r).iter().sum();
            if s == 0.0 {
                zero_rows.push(r);
                continue;
            }
            out.row_mut(r).iter_mut().for_each(|v| *v /= s);
        }
        (out, zero_rows)
    }

    /// Divides every column by its sum. Returns `Err(c)` for the first
    /// column whose sum is zero.
    pub fn column_normalized(&self) -> Result<Self, usize> {
        let sums = self.column_sums();
        if let Some(c) = sums.iter().position(|s| *s == 0.0) {
            return Err(c);
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for (v, s) in out.row_mut(r).iter_mut().zip(&sums) {
                *v /= s;
            }
        }
        Ok(out)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Ordered column indices picked from a (usually augmented) source matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnSelection(Vec<usize>);

impl ColumnSelection {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn all(cols: usize) -> Self {
        Self((0..cols).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: usize) -> bool {
        self.0.contains(&c)
    }
}

fn require_square(m: &DenseMatrix) -> Result<usize, MatrixError> {
    if m.is_square() {
        Ok(m.rows)
    } else {
        Err(MatrixError::NonSquare { rows: m.rows, cols: m.cols })
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &DenseMatrix) -> Result<f64, MatrixError> {
    let n = require_square(m)?;
    match n {
        1 => return Ok(m.data[0]),
        2 => return Ok(m.data[0] * m.data[3] - m.data[1] * m.data[2]),
        _ => {}
    }
    let mut a = m.data.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).expect("non-empty range");
        let p = a[pivot * n + col];
        if p == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            det = -det;
        }
        det *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col + 1..n {
                a[r * n + c] -= f * a[col * n + c];
            }
        }
    }
    Ok(det)
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
///
/// Fails with [`MatrixError::Singular`] when `|det|` falls below
/// `DEFAULT_SINGULAR_TOL * max_abs^k`.
pub fn inverse(m: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
    inverse_with_tol(m, DEFAULT_SINGULAR_TOL)
}

pub fn inverse_with_tol(m: &DenseMatrix, tol_singular: f64) -> Result<DenseMatrix, MatrixError> {
    let n = require_square(m)?;
    let scale = m.max_abs();
    if scale == 0.0 {
        return Err(MatrixError::Singular);
    }
    let mut a = m.data.clone();
    let mut inv = DenseMatrix::identity(n).data;
    let mut det_abs = 1.0;
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).expect("non-empty range");
        let p = a[pivot * n + col];
        if p == 0.0 {
            return Err(MatrixError::Singular);
        }
        // Compare in scaled units so the test does not overflow for large k.
        det_abs *= p.abs() / scale;
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
                inv.swap(col * n + c, pivot * n + c);
            }
        }
        for c in 0..n {
            a[col * n + c] /= p;
            inv[col * n + c] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                a[r * n + c] -= f * a[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    if det_abs < tol_singular {
        return Err(MatrixError::Singular);
    }
    DenseMatrix::new(n, n, inv)
}

/// Count of pivots exceeding `tol` under fully pivoted elimination.
pub fn numerical_rank(m: &DenseMatrix, tol: f64) -> usize {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.data.clone();
    let mut rank = 0;
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for _ in 0..rows.min(cols) {
        let mut best = (0.0, 0, 0);
        for r in (0..rows).filter(|&r| !row_used[r]) {
            for c in (0..cols).filter(|&c| !col_used[c]) {
                let v = a[r * cols + c].abs();
                if v > best.0 {
                    best = (v, r, c);
                }
            }
        }
        let (v, pr, pc) = best;
        if v <= tol {
            break;
        }
        rank += 1;
        row_used[pr] = true;
        col_used[pc] = true;
        let p = a[pr * cols + pc];
        for r in (0..rows).filter(|&r| !row_used[r]) {
            let f = a[r * cols + pc] / p;
            if f == 0.0 {
                continue;
            }
            for c in 0..cols {
                a[r * cols + c] -= f * a[pr * cols + c];
            }
        }
    }
    rank
}

/// Absolute rank tolerance derived from a relative one.
pub fn rank_tolerance(m: &DenseMatrix, relative: f64) -> f64 {
    relative * m.max_abs().max(f64::MIN_POSITIVE)
}

pub fn numerical_rank_default(m: &DenseMatrix) -> usize {
    numerical_rank(m, rank_tolerance(m, DEFAULT_RANK_TOL))
}

/// Greedy left-to-right pick of `k` linearly independent columns.
///
/// A column is kept when it raises the numerical rank of the columns kept so
/// far. For an augmented `[A 1]` the ones column is scanned last, so it is
/// only picked when the columns of `A` do not already span it.
pub fn pick_independent_columns(m: &DenseMatrix, k: usize, tol: f64) -> Result<ColumnSelection, MatrixError> {
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    for c in 0..m.cols {
        if picked.len() == k {
            break;
        }
        let mut trial = picked.clone();
        trial.push(c);
        let sub = m.select_columns(&trial)?;
        if numerical_rank(&sub, tol) == trial.len() {
            picked = trial;
        }
    }
    if picked.len() != k {
        return Err(MatrixError::RankMismatch { expected: k, found: picked.len() });
    }
    Ok(ColumnSelection(picked))
}

/// Row-wise argmax as a one-hot assignment; ties go to the lowest column.
pub fn idxmax(m: &DenseMatrix) -> AssignmentMatrix {
    let labels = m
        .row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
                .0
        })
        .collect();
    AssignmentMatrix::from_labels(labels, m.cols).expect("argmax labels are in range")
}

/// Row-wise argmax that keeps the reference label whenever it is within
/// `tie_tol` (relative to the row's largest magnitude) of the maximum.
pub fn idxmax_with_reference(m: &DenseMatrix, reference: &AssignmentMatrix, tie_tol: f64) -> AssignmentMatrix {
    assert_eq!(m.rows, reference.n(), "reference length");
    let plain = idxmax(m);
    let labels = plain
        .labels()
        .iter()
        .zip(reference.labels())
        .enumerate()
        .map(|(r, (&best, &cur))| {
            let row = m.row(r);
            let scale = row.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if cur < m.cols && row[cur] >= row[best] - tie_tol * scale {
                cur
            } else {
                best
            }
        })
        .collect();
    AssignmentMatrix::from_labels(labels, m.cols).expect("labels in range")
}

/// True when every row's assigned entry is within `tie_tol` of the row max.
pub fn is_in_idxmax(m: &DenseMatrix, c: &AssignmentMatrix, tie_tol: f64) -> bool {
    m.row_iter().zip(c.labels()).all(|(row, &l)| {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = row.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        row[l] >= max - tie_tol * scale
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    /// Hand cofactor expansion along the first row.
    fn cofactor_det(a: &DenseMatrix) -> f64 {
        let n = a.rows();
        if n == 1 {
            return a[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor_rows: Vec<Vec<f64>> =
                    (1..n).map(|r| (0..n).filter(|&c| c != j).map(|c| a[(r, c)]).collect()).collect();
                let minor = DenseMatrix::from_rows(&minor_rows).unwrap();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[(0, j)] * cofactor_det(&minor)
            })
            .sum()
    }

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(matches!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]), Err(MatrixError::NonFinite { row: 0, col: 1 })));
        assert!(matches!(
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(MatrixError::Ragged { row: 1, .. })
        ));
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn determinant_identity_and_repeated_rows() {
        assert_eq!(determinant(&DenseMatrix::identity(3)).unwrap(), 1.0);
        let rep = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.5], &[1.0, 2.0, 3.0]]);
        assert_eq!(determinant(&rep).unwrap(), 0.0);
        assert!(matches!(determinant(&DenseMatrix::zeros(2, 3)), Err(MatrixError::NonSquare { .. })));
    }

    #[test]
    fn determinant_of_example_strategy() {
        // Cofactor expansion along the first row by hand:
        // .56(.34*.1 - .1*.44) - .4(.56*.1 - .1*.46) + .04(.56*.44 - .34*.46)
        // = .56(-.01) - .4(.01) + .04(.09) = -.0056 - .004 + .0036 = -.006
        let s = m(&[&[0.56, 0.4, 0.04], &[0.56, 0.34, 0.1], &[0.46, 0.44, 0.1]]);
        let det = determinant(&s).unwrap();
        assert!((det - (-0.006)).abs() < 1e-15, "{det}");
        assert!((det - cofactor_det(&s)).abs() < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        let id = DenseMatrix::identity(4);
        assert!(inverse(&id).unwrap().approx_eq(&id, 0.0));
        let d = DenseMatrix::diagonal(&[2.0, 4.0]);
        assert!(inverse(&d).unwrap().approx_eq(&DenseMatrix::diagonal(&[0.5, 0.25]), 0.0));
        let u = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let inv = inverse(&u).unwrap();
        assert!(inv.approx_eq(&m(&[&[1.0, -1.0], &[0.0, 1.0]]), 1e-15));
        assert!(u.matmul(&inv).unwrap().approx_eq(&DenseMatrix::identity(2), 1e-9));
        let sing = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(inverse(&sing), Err(MatrixError::Singular));
    }

    #[test]
    fn singular_tolerance_is_scale_relative() {
        let big = m(&[&[1e6, 0.0], &[0.0, 1e6]]);
        assert!(inverse(&big).is_ok());
        let tiny = m(&[&[1e-8, 0.0], &[0.0, 1e-8]]);
        assert!(inverse(&tiny).is_ok());
        let near = m(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-14]]);
        assert_eq!(inverse(&near), Err(MatrixError::Singular));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DenseMatrix::zeros(4, 3), 1e-9), 0);
        let rep = DenseMatrix::from_rows(&vec![vec![0.3, -1.0, 2.0]; 5]).unwrap();
        assert_eq!(numerical_rank_default(&rep), 1);
        let a = crate::fixtures::affine_7x2();
        assert_eq!(numerical_rank_default(&a.with_ones_column()), 3);
    }

    #[test]
    fn pick_columns_examples() {
        let a = crate::fixtures::affine_7x2().with_ones_column();
        let tol = rank_tolerance(&a, DEFAULT_RANK_TOL);
        assert_eq!(pick_independent_columns(&a, 3, tol).unwrap().indices(), &[0, 1, 2]);

        // Row-stochastic: ones column is the sum of the others.
        let rs = crate::fixtures::dmi_20x3().with_ones_column();
        let tol = rank_tolerance(&rs, DEFAULT_RANK_TOL);
        assert_eq!(numerical_rank(&rs, tol), 3);
        assert_eq!(pick_independent_columns(&rs, 3, tol).unwrap().indices(), &[0, 1, 2]);

        // [[1,2,3],[2,4,7]] augmented: col 1 = 2*col 0; minor of cols {0,2} is 7-6 = 1.
        let r2 = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]]).with_ones_column();
        let tol = rank_tolerance(&r2, DEFAULT_RANK_TOL);
        assert_eq!(pick_independent_columns(&r2, 2, tol).unwrap().indices(), &[0, 2]);
        assert!(matches!(
            pick_independent_columns(&r2, 3, tol),
            Err(MatrixError::RankMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn idxmax_examples() {
        let a = m(&[&[0.3, 0.4, 0.1], &[0.0, -1.0, 0.1]]);
        assert_eq!(idxmax(&a).labels(), &[1, 2]);
        assert_eq!(idxmax(&m(&[&[5.0, 5.0, 5.0]])).labels(), &[0]);
        assert_eq!(idxmax(&m(&[&[1.0], &[-3.0]])).labels(), &[0, 0]);
        let reference = AssignmentMatrix::from_labels(vec![2], 3).unwrap();
        assert_eq!(idxmax_with_reference(&m(&[&[5.0, 5.0, 5.0]]), &reference, 0.0).labels(), &[2]);
    }
}

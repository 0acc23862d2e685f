//! Shared numeric containers and configuration records.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Norms below this value cannot be normalized.
pub const NORM_FLOOR: f64 = 1e-12;

/// Tolerance on the unit-norm invariant of feature columns.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Scales `v` to unit Euclidean norm.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let n = norm(v);
    if !(n >= NORM_FLOOR) {
        return Err(Error::DegenerateVector { norm: n });
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }
}

/// A `d x m` set of unit-norm embeddings stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Wraps column-major data whose columns are already unit norm.
    pub fn from_unit_columns(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("dim", format!("must be at least 2, got {dim}")));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim * (data.len() / dim + 1),
                actual: data.len(),
            });
        }
        for (index, col) in data.chunks_exact(dim).enumerate() {
            let n = norm(col);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm { index, norm: n });
            }
        }
        Ok(Self { dim, data })
    }

    /// Normalizes every column of raw column-major data.
    pub fn normalized(dim: usize, raw: &[f64]) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("dim", format!("must be at least 2, got {dim}")));
        }
        let mut data = Vec::with_capacity(raw.len());
        for col in raw.chunks(dim) {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: col.len(),
                });
            }
            data.extend(l2_normalize(col)?);
        }
        Ok(Self { dim, data })
    }

    pub fn from_columns<'a>(dim: usize, cols: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut data = Vec::new();
        for c in cols {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::from_unit_columns(dim, data)
    }

    /// Skips the unit-norm check; finite-difference probes step off the sphere.
    pub(crate) fn unchecked(dim: usize, data: Vec<f64>) -> Self {
        Self { dim, data }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn col(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the listed columns into a new matrix.
    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.col(i));
        }
        FeatureMatrix {
            dim: self.dim,
            data,
        }
    }

    /// `m x n` matrix of dot products between the columns of `self` and `other`.
    pub fn similarities(&self, other: &FeatureMatrix) -> Result<Matrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let (m, n) = (self.len(), other.len());
        let mut out = Vec::with_capacity(m * n);
        for x in self.columns() {
            for y in other.columns() {
                out.push(dot(x, y));
            }
        }
        Matrix::from_row_major(m, n, out)
    }
}

/// Cosine distance `c_ij = 1 - x_i . y_j` between two unit-column sets.
pub fn cosine_cost(x: &FeatureMatrix, y: &FeatureMatrix) -> Result<Matrix> {
    let mut s = x.similarities(y)?;
    for v in s.data.iter_mut() {
        *v = 1.0 - *v;
    }
    Ok(s)
}

/// Boolean `m x n` association with exactly one match per row and at most one per column.
///
/// Stored as the matched column of each row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMatrix {
    cols: usize,
    row_to_col: Vec<usize>,
}

impl AssociationMatrix {
    pub fn from_assignment(row_to_col: Vec<usize>, cols: usize) -> Result<Self> {
        if row_to_col.len() > cols {
            return Err(Error::InvalidAssociation(format!(
                "{} rows exceed {} columns",
                row_to_col.len(),
                cols
            )));
        }
        let mut used = vec![false; cols];
        for (i, &j) in row_to_col.iter().enumerate() {
            if j >= cols {
                return Err(Error::InvalidAssociation(format!(
                    "row {i} matched to out-of-range column {j}"
                )));
            }
            if used[j] {
                return Err(Error::InvalidAssociation(format!(
                    "column {j} matched more than once"
                )));
            }
            used[j] = true;
        }
        Ok(Self { cols, row_to_col })
    }

    /// Builds from a dense boolean matrix, checking the row/column sums.
    pub fn from_dense(rows: &[Vec<bool>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut assign = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            let hits: Vec<usize> = r.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect();
            if hits.len() != 1 {
                return Err(Error::InvalidAssociation(format!(
                    "row {i} sums to {}",
                    hits.len()
                )));
            }
            assign.push(hits[0]);
        }
        Self::from_assignment(assign, cols)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.row_to_col.len()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.row_to_col[i] == j
    }

    #[inline]
    pub fn matched_col(&self, i: usize) -> usize {
        self.row_to_col[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.row_to_col
    }

    pub fn to_dense(&self) -> Vec<Vec<bool>> {
        self.row_to_col
            .iter()
            .map(|&j| (0..self.cols).map(|c| c == j).collect())
            .collect()
    }
}

/// Which end of the similarity ranking the queue draws negatives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSelection {
    MostSimilar,
    MostDissimilar,
}

/// Per-anchor weighting applied to the positive-pair log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// `p^gamma` held constant during differentiation.
    ReliabilityStopgrad,
    /// `p^gamma` differentiated; unstable, kept for the property suite.
    ReliabilityKept,
    /// `(1 - p)^gamma`, differentiated.
    Focal,
    /// Plain cross-entropy.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tau: f64,
    pub gamma: f64,
    pub k: usize,
    pub lambda: f64,
    pub negative_selection: NegativeSelection,
    pub modulation: Modulation,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            gamma: 6.0,
            k: 32,
            lambda: 5.0,
            negative_selection: NegativeSelection::MostSimilar,
            modulation: Modulation::ReliabilityStopgrad,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be nonnegative, got {}", self.gamma)));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be nonnegative, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let v = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(l2_normalize(&[0.0, 0.0, 5.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        let v = l2_normalize(&[1.0, 1.0]).unwrap();
        assert!((v[0] - 0.70710678).abs() < 1e-8 && (v[1] - 0.70710678).abs() < 1e-8);
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(matches!(l2_normalize(&[0.0, 0.0]), Err(Error::DegenerateVector { .. })));
        assert!(matches!(l2_normalize(&[1e-13, 0.0]), Err(Error::DegenerateVector { .. })));
        assert!(l2_normalize(&[]).is_err());
    }

    #[test]
    fn cosine_cost_examples() {
        let x = FeatureMatrix::from_columns(2, [&[1.0, 0.0][..], &[0.0, 1.0][..]]).unwrap();
        let neg = FeatureMatrix::from_columns(2, [&[-1.0, 0.0][..]]).unwrap();
        let c = cosine_cost(&x, &x).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
        assert_eq!(c.get(1, 1), 0.0);
        assert_eq!(c.get(0, 1), 1.0);
        let c = cosine_cost(&x, &neg).unwrap();
        assert_eq!(c.get(0, 0), 2.0);
        assert_eq!(c.get(1, 0), 1.0);
    }

    #[test]
    fn cosine_cost_dimension_mismatch() {
        let x = FeatureMatrix::from_columns(2, [&[1.0, 0.0][..]]).unwrap();
        let y = FeatureMatrix::from_columns(3, [&[1.0, 0.0, 0.0][..]]).unwrap();
        assert!(matches!(cosine_cost(&x, &y), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn feature_matrix_checks_norm_and_dim() {
        assert!(matches!(
            FeatureMatrix::from_unit_columns(2, vec![1.0, 1.0]),
            Err(Error::NotUnitNorm { index: 0, .. })
        ));
        assert!(FeatureMatrix::from_unit_columns(1, vec![1.0]).is_err());
        assert_eq!(FeatureMatrix::empty(4).len(), 0);
    }

    #[test]
    fn association_invariants() {
        assert!(AssociationMatrix::from_assignment(vec![0, 0], 3).is_err());
        assert!(AssociationMatrix::from_assignment(vec![0, 1, 2], 2).is_err());
        assert!(AssociationMatrix::from_dense(&[vec![true, true]]).is_err());
        assert!(AssociationMatrix::from_dense(&[vec![false, false]]).is_err());
        let a = AssociationMatrix::from_dense(&[vec![false, true, false], vec![true, false, false]]).unwrap();
        assert_eq!(a.assignment(), &[1, 0]);
        assert!(a.get(0, 1) && !a.get(0, 0));
        assert_eq!(a.to_dense()[1], vec![true, false, false]);
    }

    #[test]
    fn loss_config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        let bad = LossConfig { tau: 0.0, ..LossConfig::default() };
        assert!(bad.validate().is_err());
        let bad = LossConfig { gamma: -1.0, ..LossConfig::default() };
        assert!(bad.validate().is_err());
        let bad = LossConfig { k: 0, ..LossConfig::default() };
        assert!(bad.validate().is_err());
    }
}

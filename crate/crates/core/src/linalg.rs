//! Small dense row-major matrices. Representations are K×F with K, F in the
//! tens at most, so nothing here is blocked or vectorized.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("rows are linearly dependent (residual norm {residual:.3e} at row {row})")]
    RankDeficient { row: usize, residual: f64 },
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("ragged rows: expected length {expected}, found {got}")]
    Ragged { expected: usize, got: usize },
}

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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map(Vec::len).ok_or(LinalgError::EmptyMatrix)?;
        if cols == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::Ragged {
                    expected: cols,
                    got: r.len(),
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

    /// `[I_k | 0]`.
    pub fn identity_block(k: usize, cols: usize) -> Self {
        let mut m = Self::zeros(k, cols);
        for i in 0..k.min(cols) {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Matrix, s: f64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `self · (I - selfᵀ self)` applied to `g`: removes from every row of `g`
    /// its component in the row space of `self`. Assumes orthonormal rows.
    pub fn project_out_row_space(&self, g: &Matrix) -> Matrix {
        assert_eq!(self.cols, g.cols);
        let mut out = g.clone();
        for r in 0..g.rows {
            for i in 0..self.rows {
                let h = self.row(i);
                let c = dot(g.row(r), h);
                for (o, hv) in out.row_mut(r).iter_mut().zip(h) {
                    *o -= c * hv;
                }
            }
        }
        out
    }

    /// Largest `|(H Hᵀ - I)_{ij}|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.rows {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(self.row(i), self.row(j)) - target).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Classical Gram-Schmidt with one re-orthogonalization pass ("twice is
/// enough"). Row space is preserved; fails if a residual row norm falls
/// below `1e-10`.
pub fn gram_schmidt(m: &Matrix) -> Result<Matrix, LinalgError> {
    const RANK_TOL: f64 = 1e-10;
    let mut q = Matrix::zeros(m.rows, m.cols);
    for i in 0..m.rows {
        let mut v = m.row(i).to_vec();
        for _ in 0..2 {
            let coeffs: Vec<f64> = (0..i).map(|j| dot(q.row(j), &v)).collect();
            for (j, c) in coeffs.into_iter().enumerate() {
                for (vk, qk) in v.iter_mut().zip(q.row(j)) {
                    *vk -= c * qk;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < RANK_TOL {
            return Err(LinalgError::RankDeficient { row: i, residual: norm });
        }
        for (dst, src) in q.row_mut(i).iter_mut().zip(&v) {
            *dst = src / norm;
        }
    }
    Ok(q)
}

//! Small dense linear algebra: a row-major matrix and a Cholesky factor.
//!
//! The matrices handled here are d×d covariance-like matrices with d in the
//! single digits, plus N×d data matrices that are only ever read row by row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major storage.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        // chunks_exact(0) panics
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn scaled(&self, c: T) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<T> {
        let mut mean = vec![T::zero(); self.cols];
        for r in self.rows() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m = *m + v;
            }
        }
        let n = T::of_usize(self.rows);
        mean.iter_mut().for_each(|m| *m = *m / n);
        mean
    }

    /// Sample covariance of the rows (divisor N − 1).
    pub fn covariance(&self) -> Result<Self> {
        if self.rows < 2 {
            return Err(Error::invalid("data", "covariance needs at least two rows"));
        }
        let mean = self.column_means();
        let d = self.cols;
        let mut cov = Self::zeros(d, d);
        for r in self.rows() {
            for i in 0..d {
                let di = r[i] - mean[i];
                for j in 0..=i {
                    cov[(i, j)] = cov[(i, j)] + di * (r[j] - mean[j]);
                }
            }
        }
        let denom = T::of_usize(self.rows - 1);
        for i in 0..d {
            for j in 0..=i {
                let v = cov[(i, j)] / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(cov)
    }

    /// Lower Cholesky factor. Fails if any pivot is not strictly positive.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let d = self.rows;
        let mut l = Self::zeros(d, d);
        for j in 0..d {
            let mut pivot = self[(j, j)];
            for k in 0..j {
                pivot = pivot - l[(j, k)] * l[(j, k)];
            }
            if !(pivot > T::zero()) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite(format!("pivot {j} is {}", pivot)));
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..d {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// `ln det A = 2 Σ ln L_ii`
    pub fn ln_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<T>() * two
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut y = vec![T::zero(); d];
        for i in 0..d {
            let row = self.l.row(i);
            let s = row[..i].iter().zip(&y).fold(b[i], |s, (&l, &yk)| s - l * yk);
            y[i] = s / row[i];
        }
        y
    }

    /// `bᵀ A⁻¹ b` without forming the inverse.
    pub fn quad_form_inv(&self, b: &[T]) -> T {
        self.solve_lower(b).iter().map(|&v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_of_known_matrix() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let c = a.cholesky().unwrap();
        let l = c.factor();
        assert_relative_eq!(l[(0, 0)], 2.0);
        assert_relative_eq!(l[(1, 0)], 1.0);
        assert_relative_eq!(l[(1, 1)], 2f64.sqrt());
        assert_relative_eq!(c.ln_det(), 8f64.ln(), epsilon = 1e-14);
        // A⁻¹ = [3 -2; -2 4] / 8
        let q = c.quad_form_inv(&[1.0, 1.0]);
        assert_relative_eq!(q, 3.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite(_))));
        let z = Matrix::<f64>::zeros(2, 2);
        assert!(z.cholesky().is_err());
    }

    #[test]
    fn covariance_of_small_sample() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]]).unwrap();
        let c = x.covariance().unwrap();
        assert_relative_eq!(c[(0, 0)], 1.0);
        assert_relative_eq!(c[(1, 1)], 3.0);
        assert_relative_eq!(c[(0, 1)], 0.0);
        assert_eq!(x.column_means(), vec![1.0, 1.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::<f64>::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}

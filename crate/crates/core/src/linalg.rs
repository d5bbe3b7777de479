//! Small dense helpers on top of nalgebra. Data matrices are N×D with one
//! sample per row.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Builds an N×D matrix from row slices. All rows must share a length.
pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], dim: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(rows.len(), dim);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Selects the given rows, in order.
pub fn select_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Vertical concatenation of two matrices with equal column counts.
pub fn vstack(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    Ok(out)
}

pub fn column_means(m: &Matrix) -> Vector {
    let n = m.nrows() as f64;
    Vector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// `MᵀM` through the blocked GEMM kernel, reading `M` with transposed
/// strides instead of materializing `Mᵀ`.
pub fn gram(m: &Matrix) -> Matrix {
    let (n, d) = (m.nrows(), m.ncols());
    let mut out = Matrix::zeros(d, d);
    if n == 0 || d == 0 {
        return out;
    }
    // SAFETY: `m` is a contiguous column-major n×d buffer, so element (k, j)
    // lives at k + j·n; the left operand Mᵀ (d×n) uses row stride n and
    // column stride 1. `out` is a contiguous d×d buffer written exactly once.
    unsafe {
        matrixmultiply::dgemm(
            d,
            n,
            d,
            1.0,
            m.as_ptr(),
            n as isize,
            1,
            m.as_ptr(),
            1,
            n as isize,
            0.0,
            out.as_mut_ptr(),
            1,
            d as isize,
        );
    }
    out
}

/// Covariance with 1/N normalization.
pub fn population_covariance(m: &Matrix) -> Matrix {
    let mean = column_means(m);
    let mut centered = m.clone();
    for (mut col, mu) in centered.column_iter_mut().zip(mean.iter()) {
        col.add_scalar_mut(-mu);
    }
    gram(&centered) / m.nrows() as f64
}

/// Reports the first non-finite entry in row-major order.
pub fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, column: j });
            }
        }
    }
    Ok(())
}

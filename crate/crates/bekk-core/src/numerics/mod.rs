//! Minimal dense linear algebra shared by the other modules.
//!
//! Everything here operates on small matrices (the model dimension is a
//! single-digit number in every practical configuration, Kronecker powers
//! stay in the hundreds), so the storage is a plain row-major `Vec<f64>` and
//! the algorithms favour robustness over asymptotic cleverness.

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when checking that a matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Errors from the dense linear-algebra kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
    #[error("matrix entry at ({row},{col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("matrix is not symmetric: |m[{row},{col}] - m[{col},{row}]| = {delta:e}")]
    NotSymmetric { row: usize, col: usize, delta: f64 },
    #[error("Cholesky decomposition failed: pivot {pivot} is non-positive ({value:e}); matrix is not positive definite")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

/// Dense row-major matrix of `f64` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting shape mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::ShapeMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        for (idx, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(NumericsError::NonFiniteEntry {
                    row: idx / cols.max(1),
                    col: idx % cols.max(1),
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Square matrix with the given diagonal, zeros elsewhere.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, NumericsError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(NumericsError::ShapeMismatch {
                    rows: r,
                    cols: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Matrix product `self * other`. Panics on a dimension mismatch, which
    /// is a programming error in this crate.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute asymmetry `|m_ij - m_ji|` together with its location.
    fn max_asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let delta = (self.get(i, j) - self.get(j, i)).abs();
                if delta > worst.2 {
                    worst = (i, j, delta);
                }
            }
        }
        worst
    }

    /// `(m + m')/2`, used to absorb floating-point asymmetry before a
    /// Cholesky factorization.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = NumericsError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// The input is symmetrized before decomposition; an asymmetry beyond
/// [`SYMMETRY_TOL`] or a non-positive pivot is reported as an error naming
/// the offending location.
pub fn cholesky(m: &Matrix) -> Result<Matrix, NumericsError> {
    assert!(m.is_square(), "cholesky requires a square matrix");
    let (i, j, delta) = m.max_asymmetry();
    if delta > SYMMETRY_TOL {
        return Err(NumericsError::NotSymmetric { row: i, col: j, delta });
    }
    let a = m.symmetrized();
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(NumericsError::NotPositiveDefinite { pivot: i, value: sum });
                }
                l.set(i, i, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let v = a.get(i, j);
            if v == 0.0 {
                continue;
            }
            for p in 0..b.rows() {
                for q in 0..b.cols() {
                    out.set(i * b.rows() + p, j * b.cols() + q, v * b.get(p, q));
                }
            }
        }
    }
    out
}

const POWER_MAX_ITER: usize = 10_000;
const POWER_TOL: f64 = 1e-10;

/// Spectral radius (largest eigenvalue modulus) of a square matrix.
///
/// 1x1 and 2x2 matrices are handled analytically. Larger matrices use power
/// iteration on the norm-growth ratio; if the ratio oscillates (complex
/// dominant pair) the routine falls back to Gelfand's formula evaluated by
/// repeated squaring, which converges for every finite matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    assert!(m.is_square(), "spectral_radius requires a square matrix");
    let n = m.rows();
    match n {
        0 => 0.0,
        1 => m.get(0, 0).abs(),
        2 => spectral_radius_2x2(m),
        _ => triangular_radius(m)
            .or_else(|| power_iteration(m))
            .unwrap_or_else(|| gelfand_radius(m)),
    }
}

/// Exact radius for (block-)triangular structure: when one side of the
/// diagonal is identically zero the eigenvalues are the diagonal entries.
/// Only structural (exact) zeros qualify.
fn triangular_radius(m: &Matrix) -> Option<f64> {
    let n = m.rows();
    let mut lower_zero = true;
    let mut upper_zero = true;
    for i in 0..n {
        for j in 0..n {
            if i > j && m.get(i, j) != 0.0 {
                lower_zero = false;
            }
            if i < j && m.get(i, j) != 0.0 {
                upper_zero = false;
            }
        }
    }
    (lower_zero || upper_zero).then(|| (0..n).fold(0.0f64, |r, i| r.max(m.get(i, i).abs())))
}

fn spectral_radius_2x2(m: &Matrix) -> f64 {
    let tr = m.get(0, 0) + m.get(1, 1);
    let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (0.5 * (tr + s)).abs().max((0.5 * (tr - s)).abs())
    } else {
        // complex conjugate pair: |lambda|^2 = det
        det.abs().sqrt()
    }
}

/// Power iteration tracking the norm-growth ratio; returns `None` when the
/// ratio fails to settle within the iteration budget.
fn power_iteration(m: &Matrix) -> Option<f64> {
    let n = m.rows();
    // Deterministic non-degenerate start vector.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) / (n as f64 + 1.0)).collect();
    let norm0 = norm2(&v);
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut prev_ratio = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w = m.mul_vec(&v);
        let norm = norm2(&w);
        if norm == 0.0 {
            return Some(0.0);
        }
        let ratio = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (ratio - prev_ratio).abs() <= POWER_TOL * ratio.max(1.0) {
            return Some(ratio);
        }
        prev_ratio = ratio;
    }
    None
}

/// Gelfand's formula: rho = lim ||A^k||^{1/k}, evaluated along k = 2^j with
/// rescaling so the powers stay representable.
fn gelfand_radius(m: &Matrix) -> f64 {
    let mut b = m.clone();
    let mut log_scale = 0.0f64; // log of the factor pulled out so far
    let mut steps = 1u64; // b ~ A^steps / exp(log_scale)
    let mut prev = f64::NAN;
    for _ in 0..64 {
        let s = b.max_abs();
        if s == 0.0 {
            return 0.0;
        }
        b = b.scaled(1.0 / s);
        log_scale += s.ln();
        let est = ((log_scale + b.frobenius().ln()) / steps as f64).exp();
        if (est - prev).abs() <= 1e-12 * est.max(1.0) {
            return est;
        }
        prev = est;
        b = b.matmul(&b);
        log_scale *= 2.0;
        steps *= 2;
    }
    prev
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

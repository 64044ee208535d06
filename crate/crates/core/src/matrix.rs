//! Dense real matrices, thin SVD, and the norms the solver measures itself by.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Result, RpcaError};

/// Dense `rows x cols` matrix of finite `f64` entries.
///
/// Storage is delegated to [`nalgebra::DMatrix`]; the public surface speaks
/// row-major `Vec<f64>` for interchange.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    data: DMatrix<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} {:?}", self.rows(), self.cols(), self.to_rows())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { data: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        Matrix { data: DMatrix::identity(n, n) }
    }

    /// Square diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Matrix { data: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }) }
    }

    /// Builds a matrix from row-major entries, checking the shape and that
    /// every entry is finite.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(RpcaError::EmptyMatrix { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(RpcaError::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(RpcaError::NonFinite { row: k / cols, col: k % cols, value: entries[k] });
        }
        Ok(Matrix { data: DMatrix::from_row_slice(rows, cols, &entries) })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(RpcaError::invalid(format!(
                "row {} has {} entries, expected {n_cols}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Self::from_row_major(n_rows, n_cols, rows.concat())
    }

    /// Wraps an existing nalgebra matrix after checking finiteness.
    pub fn from_dmatrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(RpcaError::EmptyMatrix { rows: data.nrows(), cols: data.ncols() });
        }
        for j in 0..data.ncols() {
            for i in 0..data.nrows() {
                let v = data[(i, j)];
                if !v.is_finite() {
                    return Err(RpcaError::NonFinite { row: i, col: j, value: v });
                }
            }
        }
        Ok(Matrix { data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Matrix { data: DMatrix::from_fn(rows, cols, f) }
    }

    pub(crate) fn from_dmatrix_unchecked(data: DMatrix<f64>) -> Self {
        Matrix { data }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[(row, col)] = value;
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.data.transpose().as_slice().to_vec()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|i| self.data.row(i).iter().copied().collect()).collect()
    }

    /// Column `j` as a contiguous slice (storage is column-major).
    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.rows();
        &self.data.as_slice()[j * m..(j + 1) * m]
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols()).map(|j| l2(self.column(j))).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix { data: self.data.transpose() }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols() != rhs.rows() {
            return Err(RpcaError::mismatch("matmul", self.shape(), rhs.shape()));
        }
        Ok(Matrix { data: &self.data * &rhs.data })
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Matrix { data: &self.data * k }
    }

    /// `tr(self^T rhs)`.
    pub fn inner(&self, rhs: &Matrix) -> Result<f64> {
        self.check_same_shape("inner", rhs)?;
        Ok(self.data.dot(&rhs.data))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Matrix {
        Matrix { data: self.data.map(f) }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn check_same_shape(&self, op: &'static str, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(RpcaError::mismatch(op, self.shape(), other.shape()));
        }
        Ok(())
    }
}

macro_rules! elementwise {
    ($trait:ident, $method:ident, $op:tt) => {
        /// Panics on a shape mismatch, like the nalgebra operator it wraps.
        impl $trait<&Matrix> for &Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                assert_eq!(self.shape(), rhs.shape(), concat!("shape mismatch in ", stringify!($method)));
                Matrix { data: &self.data $op &rhs.data }
            }
        }

        impl $trait<Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: Matrix) -> Matrix {
                &self $op &rhs
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl Mul<f64> for &Matrix {
    type Output = Matrix;
    fn mul(self, k: f64) -> Matrix {
        self.scale(k)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix { data: -&self.data }
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Thin SVD `M = U diag(singulars) V^T` with `k = min(m, n)` factors.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdFactors {
    pub u: Matrix,
    pub singulars: Vec<f64>,
    pub vt: Matrix,
}

impl SvdFactors {
    pub fn rank_count(&self) -> usize {
        self.singulars.len()
    }
}

/// Thin SVD with singular values sorted nonincreasing and the first nonzero
/// entry of each left singular vector made nonnegative.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    let (rows, cols) = m.shape();
    // nalgebra's bidiagonal SVD silently returns inconsistent factors on a
    // few percent of rank-deficient inputs, so the factorization runs in faer.
    let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m.data[(i, j)]);
    let raw = a.thin_svd().map_err(|_| RpcaError::SvdFailure { rows, cols })?;
    let (u, v) = (raw.U(), raw.V());
    let sv = raw.S().column_vector();
    let k = rows.min(cols);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let mut u_sorted = DMatrix::zeros(rows, k);
    let mut vt_sorted = DMatrix::zeros(k, cols);
    let mut singulars = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let sign = match (0..rows).map(|i| u[(i, src)]).find(|v| v.abs() > f64::EPSILON) {
            Some(v) if v < 0.0 => -1.0,
            _ => 1.0,
        };
        for i in 0..rows {
            u_sorted[(i, dst)] = sign * u[(i, src)];
        }
        for j in 0..cols {
            vt_sorted[(dst, j)] = sign * v[(j, src)];
        }
        if !sv[src].is_finite() {
            return Err(RpcaError::SvdFailure { rows, cols });
        }
        singulars.push(sv[src].max(0.0));
    }

    Ok(SvdFactors {
        u: Matrix::from_dmatrix_unchecked(u_sorted),
        singulars,
        vt: Matrix::from_dmatrix_unchecked(vt_sorted),
    })
}

/// `u * diag(singulars) * vt`.
pub fn reconstruct(f: &SvdFactors) -> Result<Matrix> {
    scaled_product(&f.u, &f.singulars, &f.vt)
}

/// `u * diag(weights) * vt`, shared by reconstruction, the proximal step and
/// the gradient of spectral functions.
pub(crate) fn scaled_product(u: &Matrix, weights: &[f64], vt: &Matrix) -> Result<Matrix> {
    let k = weights.len();
    if u.cols() != k || vt.rows() != k {
        return Err(RpcaError::mismatch("reconstruct", u.shape(), vt.shape()));
    }
    let mut scaled = u.data.clone();
    for (j, &w) in weights.iter().enumerate() {
        scaled.column_mut(j).scale_mut(w);
    }
    Ok(Matrix { data: scaled * &vt.data })
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.data.norm()
}

/// `||X - L - S||_F / ||X||_F`, or the absolute residual `||L + S||_F` when
/// `X` is zero.
pub fn relative_residual(x: &Matrix, l: &Matrix, s: &Matrix) -> Result<f64> {
    x.check_same_shape("relative_residual", l)?;
    x.check_same_shape("relative_residual", s)?;
    let residual = (&(x - l) - s).data.norm();
    let nx = x.data.norm();
    Ok(if nx == 0.0 { residual } else { residual / nx })
}

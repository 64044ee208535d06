//! Synthetic ground-truth instances, recovery metrics, anomaly scoring and
//! frame stacking.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RpcaError};
use crate::matrix::{frobenius_norm, svd, Matrix};
use crate::rng::SeededRng;
use crate::solver::rank_of_sorted;

/// Singular values at or below this fraction of the largest one do not count
/// towards the numerical rank.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-6;

/// Entries with magnitude at or below this are treated as zero when comparing
/// sparse supports.
const SUPPORT_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    /// Isolated entries at uniformly random positions.
    #[default]
    Entrywise,
    /// Whole columns.
    Columnwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    /// Fraction of corrupted entries (entrywise) or columns (columnwise).
    pub sparsity: f64,
    pub magnitude_low: f64,
    pub magnitude_high: f64,
    pub corruption: Corruption,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(RpcaError::EmptyMatrix { rows: self.m, cols: self.n });
        }
        if self.rank == 0 || self.rank > self.m.min(self.n) {
            return Err(RpcaError::invalid(format!(
                "rank must lie in 1..={}, got {}",
                self.m.min(self.n),
                self.rank
            )));
        }
        if !(self.sparsity > 0.0 && self.sparsity < 1.0) {
            return Err(RpcaError::invalid(format!("sparsity must lie in (0, 1), got {}", self.sparsity)));
        }
        if !(self.magnitude_low > 0.0 && self.magnitude_low <= self.magnitude_high && self.magnitude_high.is_finite()) {
            return Err(RpcaError::invalid(format!(
                "need 0 < magnitude_low <= magnitude_high, got [{}, {}]",
                self.magnitude_low, self.magnitude_high
            )));
        }
        Ok(())
    }

    /// Number of corrupted entries (entrywise) or columns (columnwise).
    pub fn corrupted_count(&self) -> usize {
        let total = match self.corruption {
            Corruption::Entrywise => self.m * self.n,
            Corruption::Columnwise => self.n,
        };
        (self.sparsity * total as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticInstance {
    pub x: Matrix,
    pub l_star: Matrix,
    pub s_star: Matrix,
}

/// Draws `k` distinct indices from `0..total` by a partial Fisher-Yates shuffle.
fn sample_distinct(rng: &mut SeededRng, total: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..total).collect();
    for i in 0..k {
        let j = i + rng.index(total - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Normal `rows x cols` factor, drawn row by row.
fn normal_factor(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    let entries: Vec<f64> = (0..rows * cols).map(|_| rng.normal()).collect();
    Matrix::from_row_major(rows, cols, entries).expect("finite normal draws")
}

/// `X = L* + S*` with `L* = A B^T` (standard-normal `A`, `B`) and `S*`
/// holding values of magnitude in `[magnitude_low, magnitude_high]` with
/// random signs.
///
/// Draw order: `A` (row-major), `B` (row-major), the corrupted positions,
/// then one sign and one magnitude per corrupted entry in position order.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticInstance> {
    spec.validate()?;
    let mut rng = SeededRng::new(seed);
    let a = normal_factor(&mut rng, spec.m, spec.rank);
    let b = normal_factor(&mut rng, spec.n, spec.rank);
    let l_star = a.matmul(&b.transpose())?;

    let mut s_star = Matrix::zeros(spec.m, spec.n);
    let corrupt = |rng: &mut SeededRng, s: &mut Matrix, i: usize, j: usize| {
        let sign = rng.sign();
        s.set(i, j, sign * rng.uniform_in(spec.magnitude_low, spec.magnitude_high));
    };
    let k = spec.corrupted_count();
    match spec.corruption {
        Corruption::Entrywise => {
            for idx in sample_distinct(&mut rng, spec.m * spec.n, k) {
                corrupt(&mut rng, &mut s_star, idx / spec.n, idx % spec.n);
            }
        }
        Corruption::Columnwise => {
            for j in sample_distinct(&mut rng, spec.n, k) {
                for i in 0..spec.m {
                    corrupt(&mut rng, &mut s_star, i, j);
                }
            }
        }
    }
    let x = &l_star + &s_star;
    Ok(SyntheticInstance { x, l_star, s_star })
}

/// Columns drawn from one random subspace, with a few columns from a second
/// subspace appended at the end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceOutlierSpec {
    pub dim: usize,
    pub inliers: usize,
    pub outliers: usize,
    pub rank: usize,
}

impl Default for SubspaceOutlierSpec {
    fn default() -> Self {
        SubspaceOutlierSpec { dim: 256, inliers: 190, outliers: 10, rank: 3 }
    }
}

/// Returns the data matrix and the (ascending) indices of the outlier columns.
///
/// Each column is `U c` with a standard-normal basis `U` (`dim x rank`) shared
/// by its group and standard-normal coefficients `c`.
pub fn generate_subspace_outliers(spec: &SubspaceOutlierSpec, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    if spec.dim == 0 || spec.inliers + spec.outliers == 0 || spec.rank == 0 || spec.rank > spec.dim {
        return Err(RpcaError::invalid(format!("infeasible subspace spec {spec:?}")));
    }
    let mut rng = SeededRng::new(seed);
    let inlier_basis = normal_factor(&mut rng, spec.dim, spec.rank);
    let outlier_basis = normal_factor(&mut rng, spec.dim, spec.rank);
    let inliers = inlier_basis.matmul(&normal_factor(&mut rng, spec.rank, spec.inliers))?;
    let outliers = outlier_basis.matmul(&normal_factor(&mut rng, spec.rank, spec.outliers.max(1)))?;
    let n = spec.inliers + spec.outliers;
    let x = Matrix::from_fn(spec.dim, n, |i, j| {
        if j < spec.inliers {
            inliers.get(i, j)
        } else {
            outliers.get(i, j - spec.inliers)
        }
    });
    Ok((x, (spec.inliers..n).collect()))
}

/// Number of singular values above `rel_threshold * sigma_1`.
pub fn rank_estimate(l: &Matrix, rel_threshold: f64) -> Result<usize> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(RpcaError::invalid(format!("rank threshold must lie in (0, 1), got {rel_threshold}")));
    }
    Ok(rank_of_sorted(&svd(l)?.singulars, rel_threshold))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryErrors {
    /// `||L - L*||_F / ||L*||_F`.
    pub low_rank: f64,
    /// `||S - S*||_F / max(1, ||S*||_F)`.
    pub sparse: f64,
    /// F1 score of the support of `S` against that of `S*`.
    pub support_f1: f64,
}

pub fn recovery_errors(l: &Matrix, l_star: &Matrix, s: &Matrix, s_star: &Matrix) -> Result<RecoveryErrors> {
    l_star.check_same_shape("recovery_errors", l)?;
    l_star.check_same_shape("recovery_errors", s)?;
    l_star.check_same_shape("recovery_errors", s_star)?;
    let nl = frobenius_norm(l_star);
    let dl = frobenius_norm(&(l - l_star));
    let low_rank = if nl == 0.0 { dl } else { dl / nl };
    let sparse = frobenius_norm(&(s - s_star)) / frobenius_norm(s_star).max(1.0);

    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (a, b) in s.iter().zip(s_star.iter()) {
        match (a.abs() > SUPPORT_THRESHOLD, b.abs() > SUPPORT_THRESHOLD) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let support_f1 = if tp + fp + fn_ == 0 { 1.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
    Ok(RecoveryErrors { low_rank, sparse, support_f1 })
}

/// Per-column `l2` norms of the sparse component.
pub fn anomaly_scores(s: &Matrix) -> Vec<f64> {
    s.column_norms()
}

/// Ascending indices whose score exceeds `threshold`.
pub fn detect_anomalies(scores: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(RpcaError::invalid(format!("threshold must be nonnegative, got {threshold}")));
    }
    Ok(scores.iter().enumerate().filter(|(_, &s)| s > threshold).map(|(i, _)| i).collect())
}

/// Vectorizes each `h x w` frame column-major into one column of a
/// `(h*w) x frames` matrix.
pub fn stack_frames(frames: &[Matrix]) -> Result<Matrix> {
    let first = frames.first().ok_or_else(|| RpcaError::invalid("no frames to stack"))?;
    for f in &frames[1..] {
        first.check_same_shape("stack_frames", f)?;
    }
    let len = first.rows() * first.cols();
    let mut data = Vec::with_capacity(len * frames.len());
    for f in frames {
        data.extend_from_slice(f.as_dmatrix().as_slice());
    }
    Matrix::from_dmatrix(nalgebra::DMatrix::from_vec(len, frames.len(), data))
}

/// Inverse of [`stack_frames`].
pub fn unstack_frames(stacked: &Matrix, height: usize, width: usize) -> Result<Vec<Matrix>> {
    if height * width != stacked.rows() {
        return Err(RpcaError::invalid(format!(
            "{height}x{width} frames need {} rows, matrix has {}",
            height * width,
            stacked.rows()
        )));
    }
    (0..stacked.cols())
        .map(|j| Matrix::from_dmatrix(nalgebra::DMatrix::from_column_slice(height, width, stacked.column(j))))
        .collect()
}

//! Sparsity penalties for the outlier component and their shrinkage maps.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RpcaError};
use crate::matrix::{l2, Matrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SparsePenalty {
    /// `sum_ij |S_ij|`.
    #[default]
    #[serde(rename = "l1")]
    EntrywiseL1,
    /// `sum_j ||S_:j||_2`, for outliers that corrupt whole columns.
    #[serde(rename = "l21")]
    ColumnwiseL21,
}

pub fn penalty_value(s: &Matrix, p: SparsePenalty) -> f64 {
    match p {
        SparsePenalty::EntrywiseL1 => s.iter().map(f64::abs).sum(),
        SparsePenalty::ColumnwiseL21 => s.column_norms().iter().sum(),
    }
}

/// `argmin_W tau * penalty(W) + 1/2 ||W - Q||_F^2`.
///
/// Entrywise: soft thresholding with `sign(0) = 0`. Columnwise: each column
/// is scaled by `(||q|| - tau) / ||q||` when `||q|| > tau` and zeroed otherwise.
pub fn shrink(q: &Matrix, tau: f64, p: SparsePenalty) -> Result<Matrix> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(RpcaError::invalid(format!("shrinkage threshold must be positive, got {tau}")));
    }
    Ok(shrink_unchecked(q, tau, p))
}

pub(crate) fn shrink_unchecked(q: &Matrix, tau: f64, p: SparsePenalty) -> Matrix {
    match p {
        SparsePenalty::EntrywiseL1 => q.map(|v| {
            let mag = v.abs() - tau;
            if mag > 0.0 {
                mag.copysign(v)
            } else {
                0.0
            }
        }),
        SparsePenalty::ColumnwiseL21 => {
            let mut out = q.as_dmatrix().clone();
            for j in 0..q.cols() {
                let norm = l2(q.column(j));
                let factor = if norm > tau { (norm - tau) / norm } else { 0.0 };
                out.column_mut(j).scale_mut(factor);
            }
            Matrix::from_dmatrix_unchecked(out)
        }
    }
}

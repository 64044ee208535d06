//! Robust principal component analysis with a nonconvex rank surrogate.
//!
//! A data matrix `X` is split into a low-rank part `L` and a sparse part `S`
//! by minimizing
//!
//! ```text
//! ||L||_gamma + lambda * ||S||_l   subject to   X = L + S
//! ```
//!
//! where `||L||_gamma = sum_i (1 + gamma) sigma_i / (gamma + sigma_i)` is a
//! tight, nonconvex approximation of `rank(L)` and `||S||_l` is either the
//! entrywise `l1` norm or the columnwise `l2,1` norm. The solver is an
//! augmented Lagrange multiplier loop; its low-rank step reduces to a scalar
//! proximal problem per singular value, handled by difference-of-convex
//! iterations.
//!
//! Layout:
//! - [`matrix`]: dense matrices, thin SVD, norms and residuals.
//! - [`surrogate`]: the gamma-norm and nuclear penalties and their proximal maps.
//! - [`sparse`]: `l1` / `l2,1` penalties and their shrinkage operators.
//! - [`solver`]: the outer loop, dual updates and convergence diagnostics.
//! - [`problems`]: synthetic instances, recovery metrics, anomaly scores, frame stacking.
//!
//! ```
//! use rpca_core::{solve, Matrix, SolverConfig};
//!
//! let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
//! let result = solve(&x, &SolverConfig::default()).unwrap();
//! assert!(result.converged);
//! ```

pub mod error;
pub mod matrix;
pub mod problems;
pub mod rng;
pub mod solver;
pub mod sparse;
pub mod surrogate;

pub use error::{Result, RpcaError};
pub use matrix::{frobenius_norm, reconstruct, relative_residual, svd, Matrix, SvdFactors};
pub use problems::{
    anomaly_scores, detect_anomalies, generate_subspace_outliers, generate_synthetic,
    rank_estimate, recovery_errors, stack_frames, unstack_frames, Corruption, RecoveryErrors,
    SubspaceOutlierSpec, SyntheticInstance, SyntheticSpec, DEFAULT_RANK_THRESHOLD,
};
pub use rng::SeededRng;
pub use solver::{
    kkt_residuals, lagrangian, solve, solve_with_observer, update_duals, update_l, update_s,
    IterationRecord, KktResiduals, LambdaPolicy, SolverConfig, SolverResult, SolverState,
    StepView,
};
pub use sparse::{penalty_value, shrink, SparsePenalty};
pub use surrogate::{
    dc_iterates, prox_matrix, prox_vector, rank_curve, surrogate_gradient, surrogate_value,
    DcConfig, RankSurrogate, DEFAULT_GAMMA,
};

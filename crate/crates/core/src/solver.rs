//! Augmented Lagrange multiplier loop for
//! `min ||L||_gamma + lambda ||S||_l  s.t.  X = L + S`.
//!
//! Each outer iteration performs, at fixed multiplier `Y` and penalty `mu`:
//! 1. `L <- prox_{F, mu}(X - S - Y/mu)` (spectral proximal step),
//! 2. `S <- shrink(X - L - Y/mu, lambda/mu)`,
//! 3. `Y <- Y + mu (L + S - X)` and `mu <- min(rho mu, mu_max)`,
//!
//! and stops once `||X - L - S||_F / ||X||_F <= tol`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RpcaError};
use crate::matrix::{frobenius_norm, scaled_product, svd, Matrix};
use crate::problems::DEFAULT_RANK_THRESHOLD;
use crate::sparse::{penalty_value, shrink_unchecked, SparsePenalty};
use crate::surrogate::{prox_matrix_detailed, surrogate_value, DcConfig, RankSurrogate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the sparsity penalty.
    pub lambda: f64,
    /// Initial penalty parameter.
    pub mu0: f64,
    /// Geometric growth factor of the penalty parameter, `> 1`.
    pub rho: f64,
    /// Cap on the penalty parameter.
    pub mu_max: f64,
    /// Stopping threshold on the relative residual.
    pub tol: f64,
    pub max_outer: usize,
    pub surrogate: RankSurrogate,
    pub penalty: SparsePenalty,
    pub dc: DcConfig,
    /// Relative singular-value threshold used for the per-iteration rank estimate.
    pub rank_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1e-3,
            mu0: 1e-4,
            rho: 1.1,
            mu_max: 1e10,
            tol: 1e-3,
            max_outer: 500,
            surrogate: RankSurrogate::default(),
            penalty: SparsePenalty::EntrywiseL1,
            dc: DcConfig::default(),
            rank_threshold: DEFAULT_RANK_THRESHOLD,
        }
    }
}

/// How `lambda` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaPolicy {
    /// Keep the configured value.
    #[default]
    Fixed,
    /// `1 / sqrt(max(m, n))`.
    Scale,
}

impl LambdaPolicy {
    pub fn lambda_for(self, configured: f64, rows: usize, cols: usize) -> f64 {
        match self {
            LambdaPolicy::Fixed => configured,
            LambdaPolicy::Scale => 1.0 / (rows.max(cols) as f64).sqrt(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(RpcaError::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("mu0", self.mu0)?;
        positive("tol", self.tol)?;
        positive("mu_max", self.mu_max)?;
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(RpcaError::invalid(format!("rho must exceed 1, got {}", self.rho)));
        }
        if self.mu_max < self.mu0 {
            return Err(RpcaError::invalid(format!(
                "mu_max ({}) must be at least mu0 ({})",
                self.mu_max, self.mu0
            )));
        }
        if self.max_outer == 0 {
            return Err(RpcaError::invalid("max_outer must be at least 1"));
        }
        if !(self.rank_threshold > 0.0 && self.rank_threshold < 1.0) {
            return Err(RpcaError::invalid(format!(
                "rank_threshold must lie in (0, 1), got {}",
                self.rank_threshold
            )));
        }
        self.surrogate.validate()?;
        self.dc.validate()
    }

    pub fn with_lambda_policy(mut self, policy: LambdaPolicy, rows: usize, cols: usize) -> Self {
        self.lambda = policy.lambda_for(self.lambda, rows, cols);
        self
    }

    /// Convex nuclear-norm baseline with the usual inexact-ALM settings for
    /// `x`: `lambda = 1/sqrt(max(m, n))`, `mu0 = 1.25 / ||X||_2`, `rho = 1.5`,
    /// `mu_max = 1e7 mu0`. Stopping rule and iteration cap are kept from `self`.
    pub fn convex_baseline(&self, x: &Matrix) -> Result<Self> {
        let top = svd(x)?.singulars[0];
        let mu0 = if top > 0.0 { 1.25 / top } else { self.mu0 };
        Ok(SolverConfig {
            lambda: LambdaPolicy::Scale.lambda_for(self.lambda, x.rows(), x.cols()),
            mu0,
            rho: 1.5,
            mu_max: 1e7 * mu0,
            surrogate: RankSurrogate::Nuclear,
            ..*self
        })
    }

    /// Same loop and parameters with the nuclear norm swapped in.
    pub fn with_nuclear(&self) -> Self {
        SolverConfig { surrogate: RankSurrogate::Nuclear, ..*self }
    }
}

/// Live iterate `(L, S, Y, mu)` after `iter` outer iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub l: Matrix,
    pub s: Matrix,
    pub y: Matrix,
    pub mu: f64,
    pub iter: usize,
}

impl SolverState {
    /// `L = S = Y = 0`, `mu = mu0`.
    pub fn initial(x: &Matrix, cfg: &SolverConfig) -> Self {
        let (m, n) = x.shape();
        SolverState {
            l: Matrix::zeros(m, n),
            s: Matrix::zeros(m, n),
            y: Matrix::zeros(m, n),
            mu: cfg.mu0,
            iter: 0,
        }
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        x.check_same_shape("solver state (L)", &self.l)?;
        x.check_same_shape("solver state (S)", &self.s)?;
        x.check_same_shape("solver state (Y)", &self.y)?;
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(RpcaError::invalid(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Diagnostics of one outer iteration `t -> t + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `||X - L^{t+1} - S^{t+1}||_F / ||X||_F`.
    pub residual: f64,
    /// Augmented Lagrangian at `(L^{t+1}, S^{t+1}, Y^t, mu^t)`.
    pub lagrangian: f64,
    pub rank_estimate: usize,
    /// `max |Y^{t+1}_ij|`.
    pub y_inf_norm: f64,
    /// Largest number of DC iterations spent on any singular value.
    pub dc_iters: usize,
    /// Penalty parameter used in this iteration, `mu^t`.
    pub mu: f64,
    /// `mu^t ||S^{t+1} - S^t||_F`.
    pub s_change: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `||L + S - X||_F / max(1, ||X||_F)`.
    pub primal: f64,
    /// `||U diag(theta) V^T + Y||_F / max(1, ||Y||_F)` with `theta = f'(sigma(L))`.
    pub dual: f64,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub l: Matrix,
    pub s: Matrix,
    pub y: Matrix,
    /// Penalty parameter the next iteration would have used.
    pub mu: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub kkt: KktResiduals,
    pub elapsed_seconds: f64,
}

impl SolverResult {
    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.residual)
    }

    pub fn final_rank(&self) -> usize {
        self.history.last().map_or(0, |r| r.rank_estimate)
    }
}

/// Borrowed view of one completed outer iteration, handed to observers.
#[derive(Debug)]
pub struct StepView<'a> {
    /// State before the iteration: `(L^t, S^t, Y^t, mu^t)`.
    pub prev: &'a SolverState,
    pub l_next: &'a Matrix,
    pub s_next: &'a Matrix,
    pub y_next: &'a Matrix,
    pub mu_next: f64,
    pub record: &'a IterationRecord,
}

fn scaled_dual(state: &SolverState) -> Matrix {
    state.y.scale(1.0 / state.mu)
}

/// `prox_{F, mu}(X - S - Y/mu)`.
pub fn update_l(x: &Matrix, state: &SolverState, cfg: &SolverConfig) -> Result<Matrix> {
    state.check(x)?;
    let target = &(x - &state.s) - &scaled_dual(state);
    Ok(prox_matrix_detailed(&target, state.mu, cfg.surrogate, &cfg.dc)?.matrix)
}

/// `shrink(X - L - Y/mu, lambda/mu)`, with `state.l` already updated.
pub fn update_s(x: &Matrix, state: &SolverState, cfg: &SolverConfig) -> Result<Matrix> {
    state.check(x)?;
    let q = &(x - &state.l) - &scaled_dual(state);
    crate::sparse::shrink(&q, cfg.lambda / state.mu, cfg.penalty)
}

/// `(Y + mu (L + S - X), min(rho mu, mu_max))`.
pub fn update_duals(x: &Matrix, state: &SolverState, cfg: &SolverConfig) -> Result<(Matrix, f64)> {
    state.check(x)?;
    let r = &(&state.l + &state.s) - x;
    Ok((&state.y + &r.scale(state.mu), (cfg.rho * state.mu).min(cfg.mu_max)))
}

fn lagrangian_from_parts(
    rank_term: f64,
    s: &Matrix,
    y: &Matrix,
    residual: &Matrix,
    mu: f64,
    cfg: &SolverConfig,
) -> f64 {
    let r2 = frobenius_norm(residual).powi(2);
    rank_term + cfg.lambda * penalty_value(s, cfg.penalty) + y.as_dmatrix().dot(residual.as_dmatrix())
        + 0.5 * mu * r2
}

/// `F(L) + lambda ||S||_l + <Y, L + S - X> + (mu/2) ||L + S - X||_F^2`.
pub fn lagrangian(x: &Matrix, state: &SolverState, cfg: &SolverConfig) -> Result<f64> {
    state.check(x)?;
    let rank_term = surrogate_value(&svd(&state.l)?.singulars, cfg.surrogate)?;
    let r = &(&state.l + &state.s) - x;
    Ok(lagrangian_from_parts(rank_term, &state.s, &state.y, &r, state.mu, cfg))
}

/// Primal feasibility and stationarity residuals of a complete iterate.
pub fn kkt_residuals(x: &Matrix, state: &SolverState, cfg: &SolverConfig) -> Result<KktResiduals> {
    state.check(x)?;
    let r = &(&state.l + &state.s) - x;
    let primal = frobenius_norm(&r) / frobenius_norm(x).max(1.0);
    let f = svd(&state.l)?;
    let theta: Vec<f64> = f.singulars.iter().map(|&s| cfg.surrogate.scalar_derivative(s)).collect();
    let grad = scaled_product(&f.u, &theta, &f.vt)?;
    let dual = frobenius_norm(&(&grad + &state.y)) / frobenius_norm(&state.y).max(1.0);
    Ok(KktResiduals { primal, dual })
}

pub fn solve(x: &Matrix, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_with_observer(x, cfg, |_| {})
}

/// Runs the solver, calling `observer` once per outer iteration after the
/// dual update, on the caller's thread.
pub fn solve_with_observer(
    x: &Matrix,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<SolverResult> {
    cfg.validate()?;
    let start = Instant::now();
    let norm_x = frobenius_norm(x);
    let mut state = SolverState::initial(x, cfg);
    let mut history = Vec::new();
    let mut converged = false;

    while state.iter < cfg.max_outer {
        let t = state.iter;
        let mu = state.mu;
        let y_scaled = scaled_dual(&state);

        let target = &(x - &state.s) - &y_scaled;
        let prox = prox_matrix_detailed(&target, mu, cfg.surrogate, &cfg.dc)
            .map_err(|e| RpcaError::AtIteration { iter: t + 1, source: Box::new(e) })?;
        let l_next = prox.matrix;

        let q = &(x - &l_next) - &y_scaled;
        let s_next = shrink_unchecked(&q, cfg.lambda / mu, cfg.penalty);

        let r = &(&l_next + &s_next) - x;
        let y_next = &state.y + &r.scale(mu);
        let mu_next = (cfg.rho * mu).min(cfg.mu_max);

        let norm_r = frobenius_norm(&r);
        let residual = if norm_x == 0.0 { norm_r } else { norm_r / norm_x };
        let sing = &prox.factors.singulars;
        let rank_term = sing.iter().map(|&s| cfg.surrogate.scalar_value(s)).sum();
        let record = IterationRecord {
            iter: t + 1,
            residual,
            lagrangian: lagrangian_from_parts(rank_term, &s_next, &state.y, &r, mu, cfg),
            rank_estimate: rank_of_sorted(sing, cfg.rank_threshold),
            y_inf_norm: y_next.max_abs(),
            dc_iters: prox.dc_iters,
            mu,
            s_change: mu * frobenius_norm(&(&s_next - &state.s)),
        };

        observer(&StepView {
            prev: &state,
            l_next: &l_next,
            s_next: &s_next,
            y_next: &y_next,
            mu_next,
            record: &record,
        });
        history.push(record);
        state = SolverState { l: l_next, s: s_next, y: y_next, mu: mu_next, iter: t + 1 };

        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }

    let kkt = kkt_residuals(x, &state, cfg)?;
    Ok(SolverResult {
        l: state.l,
        s: state.s,
        y: state.y,
        mu: state.mu,
        iterations: state.iter,
        converged,
        history,
        kkt,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Count of entries above `rel * max`, for values sorted nonincreasing.
pub(crate) fn rank_of_sorted(singulars: &[f64], rel: f64) -> usize {
    match singulars.first() {
        Some(&top) if top > 0.0 => singulars.iter().filter(|&&s| s > rel * top).count(),
        _ => 0,
    }
}

//! Spectral rank penalties and their proximal operators.
//!
//! Both penalties act on singular values only, so the matrix proximal problem
//! `min_Z F(Z) + (mu/2) ||Z - A||_F^2` is solved by taking the SVD of `A`,
//! solving a scalar problem per singular value, and reassembling with the
//! same singular vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RpcaError};
use crate::matrix::{scaled_product, svd, Matrix, SvdFactors};

/// Spectral penalty applied to the low-rank component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RankSurrogate {
    /// `sum_i (1 + gamma) sigma_i / (gamma + sigma_i)`: tends to the rank as
    /// `gamma -> 0` and to the nuclear norm as `gamma -> inf`.
    Gamma { gamma: f64 },
    /// `sum_i sigma_i`, the convex baseline.
    Nuclear,
}

pub const DEFAULT_GAMMA: f64 = 0.01;

impl Default for RankSurrogate {
    fn default() -> Self {
        RankSurrogate::Gamma { gamma: DEFAULT_GAMMA }
    }
}

impl RankSurrogate {
    pub fn gamma(gamma: f64) -> Result<Self> {
        let s = RankSurrogate::Gamma { gamma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RankSurrogate::Gamma { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(RpcaError::invalid(format!("gamma must be positive and finite, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    /// Penalty contributed by a single singular value.
    pub fn scalar_value(&self, sigma: f64) -> f64 {
        match *self {
            RankSurrogate::Gamma { gamma } => (1.0 + gamma) * sigma / (gamma + sigma),
            RankSurrogate::Nuclear => sigma,
        }
    }

    /// Derivative of [`scalar_value`](Self::scalar_value). At `sigma = 0` the
    /// gamma branch is `(1 + gamma) / gamma`, which the formula also yields.
    pub fn scalar_derivative(&self, sigma: f64) -> f64 {
        match *self {
            RankSurrogate::Gamma { gamma } => {
                if sigma == 0.0 {
                    (1.0 + gamma) / gamma
                } else {
                    (1.0 + gamma) * gamma / ((gamma + sigma) * (gamma + sigma))
                }
            }
            RankSurrogate::Nuclear => 1.0,
        }
    }

    /// `f(sigma) + (mu/2) (sigma - sigma_a)^2`, the scalar proximal objective.
    pub fn prox_objective(&self, sigma: f64, sigma_a: f64, mu: f64) -> f64 {
        self.scalar_value(sigma) + 0.5 * mu * (sigma - sigma_a) * (sigma - sigma_a)
    }
}

/// Inner-loop controls for the difference-of-convex iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcConfig {
    pub max_inner: usize,
    /// Stop once the largest componentwise change is at most this.
    pub tol: f64,
}

impl Default for DcConfig {
    fn default() -> Self {
        DcConfig { max_inner: 30, tol: 1e-10 }
    }
}

impl DcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_inner == 0 {
            return Err(RpcaError::invalid("dc max_inner must be at least 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(RpcaError::invalid(format!("dc tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

fn check_nonnegative(sigma: &[f64]) -> Result<()> {
    match sigma.iter().position(|&s| s < 0.0 || !s.is_finite()) {
        Some(i) => Err(RpcaError::invalid(format!(
            "singular value {i} must be finite and nonnegative, got {}",
            sigma[i]
        ))),
        None => Ok(()),
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(RpcaError::invalid(format!("mu must be positive and finite, got {mu}")))
    }
}

pub fn surrogate_value(sigma: &[f64], s: RankSurrogate) -> Result<f64> {
    check_nonnegative(sigma)?;
    Ok(sigma.iter().map(|&x| s.scalar_value(x)).sum())
}

pub fn surrogate_gradient(sigma: &[f64], s: RankSurrogate) -> Result<Vec<f64>> {
    check_nonnegative(sigma)?;
    Ok(sigma.iter().map(|&x| s.scalar_derivative(x)).collect())
}

/// Scalar proximal step: returns the minimizer over `sigma >= 0` and the
/// number of DC iterations spent.
///
/// For the gamma penalty the DC map `sigma <- (sigma_a - f'(sigma)/mu)_+` is
/// run from `sigma_a`. The objective is concave then convex on `[0, inf)`, so
/// the descent lands on the only interior local minimum (or on zero); that
/// point is then compared against the boundary candidate `sigma = 0`.
pub(crate) fn prox_scalar(sigma_a: f64, mu: f64, s: RankSurrogate, cfg: &DcConfig) -> (f64, usize) {
    if sigma_a <= 0.0 {
        return (0.0, 0);
    }
    match s {
        RankSurrogate::Nuclear => ((sigma_a - 1.0 / mu).max(0.0), 0),
        RankSurrogate::Gamma { .. } => {
            let mut sigma = sigma_a;
            let mut iters = 0;
            while iters < cfg.max_inner {
                let next = (sigma_a - s.scalar_derivative(sigma) / mu).max(0.0);
                iters += 1;
                let change = (next - sigma).abs();
                sigma = next;
                if change <= cfg.tol || sigma == 0.0 {
                    break;
                }
            }
            if sigma > 0.0 && s.prox_objective(0.0, sigma_a, mu) <= s.prox_objective(sigma, sigma_a, mu) {
                sigma = 0.0;
            }
            (sigma, iters)
        }
    }
}

/// Iterates of the DC map `sigma^{k+1} = (sigma_a - f'(sigma^k)/mu)_+` from
/// `sigma^0 = sigma_a`, including the start point, without the final boundary
/// comparison. Exposed for diagnostics.
pub fn dc_iterates(sigma_a: f64, mu: f64, s: RankSurrogate, cfg: &DcConfig) -> Result<Vec<f64>> {
    check_mu(mu)?;
    check_nonnegative(&[sigma_a])?;
    let mut out = vec![sigma_a];
    let mut sigma = sigma_a;
    for _ in 0..cfg.max_inner {
        let next = (sigma_a - s.scalar_derivative(sigma) / mu).max(0.0);
        let change = (next - sigma).abs();
        sigma = next;
        out.push(sigma);
        if change <= cfg.tol || sigma == 0.0 {
            break;
        }
    }
    Ok(out)
}

/// `argmin_{sigma >= 0} f(sigma) + (mu/2) ||sigma - sigma_a||^2`, solved
/// componentwise.
pub fn prox_vector(sigma_a: &[f64], mu: f64, s: RankSurrogate, cfg: &DcConfig) -> Result<Vec<f64>> {
    Ok(prox_vector_counted(sigma_a, mu, s, cfg)?.0)
}

/// Like [`prox_vector`], also returning the largest inner iteration count.
pub(crate) fn prox_vector_counted(
    sigma_a: &[f64],
    mu: f64,
    s: RankSurrogate,
    cfg: &DcConfig,
) -> Result<(Vec<f64>, usize)> {
    check_mu(mu)?;
    check_nonnegative(sigma_a)?;
    s.validate()?;
    cfg.validate()?;
    let mut max_iters = 0;
    let out = sigma_a
        .iter()
        .map(|&a| {
            let (v, k) = prox_scalar(a, mu, s, cfg);
            max_iters = max_iters.max(k);
            v
        })
        .collect();
    Ok((out, max_iters))
}

/// Result of a matrix proximal step that keeps the factors around for
/// diagnostics.
#[derive(Clone, Debug)]
pub(crate) struct SpectralProx {
    pub matrix: Matrix,
    /// Factors of the result: the input's singular vectors with shrunk values.
    pub factors: SvdFactors,
    pub dc_iters: usize,
}

pub(crate) fn prox_matrix_detailed(
    a: &Matrix,
    mu: f64,
    s: RankSurrogate,
    cfg: &DcConfig,
) -> Result<SpectralProx> {
    let input = svd(a)?;
    let (shrunk, dc_iters) = prox_vector_counted(&input.singulars, mu, s, cfg)?;
    let matrix = scaled_product(&input.u, &shrunk, &input.vt)?;
    Ok(SpectralProx {
        matrix,
        factors: SvdFactors { u: input.u, singulars: shrunk, vt: input.vt },
        dc_iters,
    })
}

/// `argmin_Z F(Z) + (mu/2) ||Z - A||_F^2` for the spectral penalty `F`.
pub fn prox_matrix(a: &Matrix, mu: f64, s: RankSurrogate, cfg: &DcConfig) -> Result<Matrix> {
    Ok(prox_matrix_detailed(a, mu, s, cfg)?.matrix)
}

/// `(sigma, f(sigma))` samples of the scalar penalty, for plotting.
pub fn rank_curve(s: RankSurrogate, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_nonnegative(grid)?;
    s.validate()?;
    Ok(grid.iter().map(|&x| (x, s.scalar_value(x))).collect())
}

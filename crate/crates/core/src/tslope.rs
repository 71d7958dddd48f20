//! Tslope: EM for the multivariate t model with Gslope as the M-step.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gslope::{
    estimate_gslope, gslope_penalty, solve_gslope, AdmmConfig, PrecisionEstimate,
};
use crate::matrix::{sample_covariance, weighted_moments, SymMatrix};
use crate::slope::LambdaSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    /// Degrees of freedom, fixed and known (`> 2`).
    pub nu: f64,
    /// Stop once `||Θ_{k+1} - Θ_k||_F < epsilon`.
    pub epsilon: f64,
    pub max_em_iter: usize,
    pub inner: AdmmConfig,
    /// Standardize each weighted scatter matrix to a correlation matrix
    /// before the Gslope M-step (and map the estimate back).
    pub standardize: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            nu: 4.0,
            epsilon: 1e-4,
            max_em_iter: 100,
            inner: AdmmConfig::default(),
            standardize: true,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu.is_nan() || self.nu <= 2.0 {
            return Err(Error::Config(format!("nu must exceed 2, got {}", self.nu)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_em_iter == 0 {
            return Err(Error::Config("max_em_iter must be at least 1".into()));
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TslopeEstimate {
    pub mu: Vec<f64>,
    /// Estimate of `Θ = Ψ⁻¹` (inverse dispersion, not inverse covariance).
    pub theta: PrecisionEstimate,
    /// E-step weights used in the final M-step.
    pub tau_weights: Vec<f64>,
    pub em_iterations: usize,
    pub converged: bool,
}

/// `(x - μ)ᵀ Θ (x - μ)`.
pub fn mahalanobis(x: &[f64], mu: &[f64], theta: &SymMatrix) -> Result<f64> {
    let p = theta.dim();
    for len in [x.len(), mu.len()] {
        if len != p {
            return Err(Error::DimensionMismatch { expected: p, got: len });
        }
    }
    let d = DVector::from_iterator(p, x.iter().zip(mu).map(|(a, b)| a - b));
    Ok((d.transpose() * theta.as_matrix() * &d)[(0, 0)])
}

/// E-step weight `E[τ | x] = (ν + p) / (ν + δ)`.
pub fn estep_tau(delta: f64, nu: f64, p: usize) -> f64 {
    (nu + p as f64) / (nu + delta)
}

/// M-step moments: τ-weighted mean and `(1/n) Σ τ_j (x_j - μ)(x_j - μ)ᵀ`.
pub fn mstep_moments(x: &DMatrix<f64>, tau: &[f64]) -> Result<(Vec<f64>, SymMatrix)> {
    if x.nrows() < 2 {
        return Err(Error::Domain(format!("need at least 2 observations, got {}", x.nrows())));
    }
    if let Some(j) = tau.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!("weight {j} must be positive and finite, got {}", tau[j])));
    }
    weighted_moments(x, tau)
}

fn m_step(
    s: &SymMatrix,
    lambda: &LambdaSequence,
    config: &EmConfig,
) -> Result<PrecisionEstimate> {
    if config.standardize {
        estimate_gslope(s, lambda, &config.inner)
    } else {
        solve_gslope(s, lambda, &config.inner)
    }
}

fn e_step(x: &DMatrix<f64>, mu: &[f64], theta: &SymMatrix, nu: f64) -> Result<Vec<f64>> {
    let p = x.ncols();
    let tau = (0..x.nrows())
        .into_par_iter()
        .map(|j| {
            let row: Vec<f64> = x.row(j).iter().copied().collect();
            mahalanobis(&row, mu, theta).map(|delta| estep_tau(delta, nu, p))
        })
        .collect::<Result<Vec<f64>>>()?;
    if tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::NonFinite("E-step weights".into()));
    }
    Ok(tau)
}

/// Tslope fit of the rows of `x`.
///
/// Starts from the sample mean and a Gslope fit of the ordinary covariance,
/// then alternates E-steps (weights from the current μ, Θ) and M-steps
/// (weighted moments followed by Gslope on the weighted scatter).
pub fn estimate_tslope(
    x: &DMatrix<f64>,
    lambda: &LambdaSequence,
    config: &EmConfig,
) -> Result<TslopeEstimate> {
    config.validate()?;
    if x.nrows() < 2 {
        return Err(Error::Domain(format!("need at least 2 observations, got {}", x.nrows())));
    }
    let (mut mu, s0) = sample_covariance(x)?;
    let mut theta = m_step(&s0, lambda, config)?;
    let mut tau = vec![1.0; x.nrows()];
    let mut converged = false;
    let mut em_iterations = 0;

    for k in 1..=config.max_em_iter {
        em_iterations = k;
        tau = e_step(x, &mu, &theta.theta, config.nu)?;
        let (mu_next, s) = mstep_moments(x, &tau)?;
        let next = m_step(&s, lambda, config)?;
        let change = (next.theta.as_matrix() - theta.theta.as_matrix()).norm();
        mu = mu_next;
        theta = next;
        log::debug!("EM iteration {k}: ||ΔΘ||_F = {change:.3e}");
        if change < config.epsilon {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("EM stopped at max_em_iter={}", config.max_em_iter);
    }
    Ok(TslopeEstimate {
        mu,
        theta,
        tau_weights: tau,
        em_iterations,
        converged,
    })
}

/// Penalized observed-data t log-likelihood (additive constants dropped):
///
/// `(n/2) log det Θ - ((ν + p)/2) Σ_j log(ν + δ_j) - (n/2) P_λ(Θ)`,
///
/// the quantity an unstandardized EM run does not decrease.
pub fn tslope_objective(
    x: &DMatrix<f64>,
    mu: &[f64],
    theta: &SymMatrix,
    lambda: &LambdaSequence,
    nu: f64,
) -> Result<f64> {
    let (n, p) = x.shape();
    let mut sum_log = 0.0;
    for j in 0..n {
        let row: Vec<f64> = x.row(j).iter().copied().collect();
        sum_log += (nu + mahalanobis(&row, mu, theta)?).ln();
    }
    let half_n = 0.5 * n as f64;
    Ok(half_n * theta.log_det_pd()? - 0.5 * (nu + p as f64) * sum_log
        - half_n * gslope_penalty(theta, lambda)?)
}

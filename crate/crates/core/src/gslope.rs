//! Gslope: sorted-ℓ1 penalized Gaussian likelihood solved by ADMM.
//!
//! The solver minimizes
//!
//! ```text
//! -log det Θ + tr(Θ S) + Σ_{i≠j} λ_{r(i,j)} |θ_ij|
//! ```
//!
//! where each unordered pair `{i, j}` receives the weight `λ_r` of its rank
//! `r` among the sorted off-diagonal magnitudes, on both `θ_ij` and `θ_ji`.
//! With a constant sequence this is the graphical lasso with penalty
//! `λ Σ_{i≠j} |θ_ij|`. The diagonal is not penalized.
//!
//! Iterates (scaled dual form):
//!
//! ```text
//! Θ ← F_ρ(Y - Z - S/ρ)
//! Y ← prox_{J_λ, ρ}(Θ + Z)    (off-diagonal; diagonal copied from Θ + Z)
//! Z ← Z + Θ - Y
//! ```

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{fill_off_diagonal, pair_count, upper_triangle, SymMatrix};
use crate::slope::{dual_sorted_l1, prox_sorted_l1, sorted_l1, LambdaSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 1.0,
            tol_primal: 1e-5,
            tol_dual: 1e-5,
            max_iter: 2000,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rho) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if !positive(self.tol_primal) || !positive(self.tol_dual) {
            return Err(Error::Config("ADMM tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol_primal = tol;
        self.tol_dual = tol;
        self
    }
}

/// Result of a Gslope fit.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    /// Smooth iterate Θ, positive definite.
    pub theta: SymMatrix,
    /// Sparse iterate Y; off-diagonal zeros are exact.
    pub support: SymMatrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// `-log det Θ + tr(Θ S) + P_λ(Y)` on the scale the solver worked on.
    pub objective: f64,
}

/// Correlation matrix of `s` and the standard deviations used to form it.
pub fn standardize_to_correlation(s: &SymMatrix) -> Result<(SymMatrix, Vec<f64>)> {
    let diag = s.diagonal();
    if let Some(k) = diag.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Domain(format!(
            "diagonal entry {k} must be positive to standardize, got {}",
            diag[k]
        )));
    }
    let scales: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    let p = s.dim();
    let r = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            s.get(i, j) / (scales[i] * scales[j])
        }
    });
    Ok((SymMatrix::symmetrize(r)?, scales))
}

/// Maps a precision matrix of the correlation matrix back to the covariance
/// scale: `Θ_cov[i][j] = Θ_corr[i][j] / (scales[i] * scales[j])`.
pub fn rescale_precision(theta_corr: &SymMatrix, scales: &[f64]) -> Result<SymMatrix> {
    check_scales(theta_corr.dim(), scales)?;
    let p = theta_corr.dim();
    let m = DMatrix::from_fn(p, p, |i, j| theta_corr.get(i, j) / (scales[i] * scales[j]));
    SymMatrix::symmetrize(m)
}

fn to_correlation_scale(theta: &SymMatrix, scales: &[f64]) -> Result<SymMatrix> {
    check_scales(theta.dim(), scales)?;
    let p = theta.dim();
    let m = DMatrix::from_fn(p, p, |i, j| theta.get(i, j) * scales[i] * scales[j]);
    SymMatrix::symmetrize(m)
}

fn check_scales(p: usize, scales: &[f64]) -> Result<()> {
    if scales.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: scales.len(),
        });
    }
    if let Some(k) = scales.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Domain(format!("scale {k} must be positive")));
    }
    Ok(())
}

/// Closed-form minimizer of `-log det Θ + (ρ/2) ||Θ - S̃||²_F`:
/// with `S̃ = Q diag(h) Qᵀ`, returns `Q diag(d) Qᵀ`,
/// `d_i = (h_i + sqrt(h_i² + 4/ρ)) / 2`.
pub fn theta_update(s_tilde: &SymMatrix, rho: f64) -> Result<SymMatrix> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    theta_update_raw(s_tilde.as_matrix(), rho).and_then(SymMatrix::symmetrize)
}

fn theta_update_raw(s_tilde: &DMatrix<f64>, rho: f64) -> Result<DMatrix<f64>> {
    if s_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("theta-update input".into()));
    }
    let eig = SymmetricEigen::new(s_tilde.clone());
    let q = &eig.eigenvectors;
    let d = eig
        .eigenvalues
        .map(|h| 0.5 * (h + (h * h + 4.0 / rho).sqrt()));
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    let theta = scaled * q.transpose();
    Ok((&theta + theta.transpose()) * 0.5)
}

/// Penalty `P_λ(Θ) = 2 J_λ(upper(Θ))`, i.e. λ applied to both triangles.
pub fn gslope_penalty(theta: &SymMatrix, lambda: &LambdaSequence) -> Result<f64> {
    Ok(2.0 * sorted_l1(&theta.upper_triangle(), lambda)?)
}

/// `-log det Θ + tr(Θ S) + P_λ(Θ)`; `+inf` when Θ is not positive definite.
pub fn gslope_objective(theta: &SymMatrix, s: &SymMatrix, lambda: &LambdaSequence) -> Result<f64> {
    let penalty = gslope_penalty(theta, lambda)?;
    match theta.log_det_pd() {
        Ok(ld) => Ok(-ld + theta.trace_product(s) + penalty),
        Err(Error::NotPositiveDefinite) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Optional ADMM starting point `(Y, Z)`; defaults to `(I, 0)`.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

fn check_problem(s: &SymMatrix, lambda: &LambdaSequence) -> Result<()> {
    let m = pair_count(s.dim());
    if lambda.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: lambda.len(),
        });
    }
    if s.as_matrix().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance input".into()));
    }
    Ok(())
}

/// Runs ADMM on `s` as given (no standardization).
pub fn solve_gslope(
    s: &SymMatrix,
    lambda: &LambdaSequence,
    config: &AdmmConfig,
) -> Result<PrecisionEstimate> {
    solve_gslope_from(s, lambda, config, None).map(|(est, _)| est)
}

/// As [`solve_gslope`], starting from `warm` and returning the final `(Y, Z)`.
pub fn solve_gslope_from(
    s: &SymMatrix,
    lambda: &LambdaSequence,
    config: &AdmmConfig,
    warm: Option<WarmStart>,
) -> Result<(PrecisionEstimate, WarmStart)> {
    config.validate()?;
    check_problem(s, lambda)?;
    let p = s.dim();
    let rho = config.rho;
    let s_over_rho = s.as_matrix() / rho;
    let (mut y, mut z) = match warm {
        Some(w) if w.y.shape() == (p, p) && w.z.shape() == (p, p) => (w.y, w.z),
        _ => (DMatrix::identity(p, p), DMatrix::zeros(p, p)),
    };
    let mut theta = DMatrix::identity(p, p);
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iter {
        iterations = k;
        let s_tilde = &y - &z - &s_over_rho;
        theta = theta_update_raw(&s_tilde, rho)?;

        let v = &theta + &z;
        let shrunk = prox_sorted_l1(&upper_triangle(&v), lambda, rho)?;
        let mut y_next = DMatrix::from_diagonal(&v.diagonal());
        fill_off_diagonal(&mut y_next, &shrunk);

        let gap = &theta - &y_next;
        z += &gap;
        primal = gap.norm();
        dual = rho * (&y_next - &y).norm();
        y = y_next;

        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::NonFinite(format!(
                "ADMM iterate at iteration {k} (check rho and the input matrix)"
            )));
        }
        if primal <= config.tol_primal * (1.0 + theta.norm())
            && dual <= config.tol_dual * (1.0 + z.norm())
        {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "ADMM stopped at max_iter={} (primal {primal:.3e}, dual {dual:.3e})",
            config.max_iter
        );
    }

    let theta = SymMatrix::symmetrize(theta)?;
    let support = SymMatrix::symmetrize(y.clone())?;
    let penalty = 2.0 * sorted_l1(&support.upper_triangle(), lambda)?;
    let objective = -theta.log_det_pd()? + theta.trace_product(s) + penalty;
    Ok((
        PrecisionEstimate {
            theta,
            support,
            iterations,
            primal_residual: primal,
            dual_residual: dual,
            converged,
            objective,
        },
        WarmStart { y, z },
    ))
}

/// Gslope estimate for covariance `s`.
///
/// `s` is standardized to a correlation matrix, ADMM runs on the correlation
/// scale with `lambda`, and `theta`/`support` are mapped back to the scale of
/// `s`. `objective` refers to the correlation-scale problem.
pub fn estimate_gslope(
    s: &SymMatrix,
    lambda: &LambdaSequence,
    config: &AdmmConfig,
) -> Result<PrecisionEstimate> {
    let (r, scales) = standardize_to_correlation(s)?;
    let mut est = solve_gslope(&r, lambda, config)?;
    est.theta = rescale_precision(&est.theta, &scales)?;
    est.support = rescale_precision(&est.support, &scales)?;
    Ok(est)
}

/// Dual feasibility of a fit: `J^D_λ(upper(Θ⁻¹ - R)) <= 1 + 1e-4`, evaluated
/// on the correlation scale of `s` (where the estimate was computed).
///
/// Returns `(feasible, dual_norm)`. With an all-zero λ the dual norm is `0`
/// if `Θ⁻¹ = R` off the diagonal and `+inf` otherwise.
pub fn check_dual_feasibility(
    estimate: &PrecisionEstimate,
    s: &SymMatrix,
    lambda: &LambdaSequence,
) -> Result<(bool, f64)> {
    const TOL: f64 = 1e-4;
    if estimate.theta.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: estimate.theta.dim(),
        });
    }
    let (r, scales) = standardize_to_correlation(s)?;
    let theta_corr = to_correlation_scale(&estimate.theta, &scales)?;
    let w = theta_corr.inverse_pd()?;
    let gap: Vec<f64> = upper_triangle(&(w.as_matrix() - r.as_matrix()));
    let dual_norm = if lambda.is_all_zero() {
        if lambda.len() != gap.len() {
            return Err(Error::DimensionMismatch {
                expected: gap.len(),
                got: lambda.len(),
            });
        }
        if gap.iter().all(|g| g.abs() <= 1e-12) {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        dual_sorted_l1(&gap, lambda)?
    };
    Ok((dual_norm <= 1.0 + TOL, dual_norm))
}

/// Edges `(i, j)`, `i < j`, with a nonzero support entry (0-based).
pub fn extract_graph(estimate: &PrecisionEstimate) -> Vec<(usize, usize)> {
    let p = estimate.support.dim();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if estimate.support.get(i, j) != 0.0 {
                edges.push((i, j));
            }
        }
    }
    edges
}

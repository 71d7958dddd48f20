//! Tuning-parameter sequences derived from multiple-testing corrections.
//!
//! Every sequence maps a per-test significance level to the critical sample
//! correlation of the `t_{n-2}` test for zero correlation,
//! `t / sqrt(n - 2 + t²)` with `t = t_{n-2}(1 - level)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{pair_count, SymMatrix};
use crate::slope::LambdaSequence;
use crate::stat_fns::student_t_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Banerjee,
    Bonferroni,
    Holm,
    Bh,
    Constant,
}

/// Which tuning scheme to use and at what level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    pub scheme: Scheme,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub constant_value: f64,
    /// Use `1 - α / (2(m + 1 - k))` in the Holm sequence instead of
    /// `1 - α / (m + 1 - k)`.
    #[serde(default)]
    pub holm_two_sided: bool,
}

fn default_alpha() -> f64 {
    0.05
}

impl TuningSpec {
    pub fn new(scheme: Scheme, alpha: f64) -> Self {
        TuningSpec {
            scheme,
            alpha,
            constant_value: 0.0,
            holm_two_sided: false,
        }
    }

    pub fn constant(value: f64) -> Self {
        TuningSpec {
            scheme: Scheme::Constant,
            alpha: default_alpha(),
            constant_value: value,
            holm_two_sided: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme == Scheme::Constant {
            if !(self.constant_value >= 0.0 && self.constant_value.is_finite()) {
                return Err(Error::Config(format!(
                    "constant_value must be finite and >= 0, got {}",
                    self.constant_value
                )));
            }
        } else {
            check_alpha(self.alpha)?;
        }
        Ok(())
    }

    /// Full length-`p(p-1)/2` sequence for covariance `s` estimated from `n`
    /// observations. Banerjee and Bonferroni yield flat sequences.
    pub fn sequence(&self, s: &SymMatrix, n: usize) -> Result<LambdaSequence> {
        self.validate()?;
        let m = pair_count(s.dim());
        match self.scheme {
            Scheme::Banerjee => lambda_constant(lambda_banerjee(s, n, self.alpha)?, m),
            Scheme::Bonferroni => lambda_constant(lambda_bonferroni(s, n, self.alpha)?, m),
            Scheme::Holm => lambda_holm_with(n, m, self.alpha, self.holm_two_sided),
            Scheme::Bh => lambda_bh(n, m, self.alpha),
            Scheme::Constant => lambda_constant(self.constant_value, m),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "tuning formulas need at least 3 observations, got {n}"
        )));
    }
    Ok(())
}

/// Critical correlation for a one-sided t quantile at `1 - level`.
fn critical_correlation(df: u64, level: f64) -> Result<f64> {
    let t = student_t_quantile(df, 1.0 - level)?;
    Ok(t / (df as f64 + t * t).sqrt())
}

fn max_variance(s: &SymMatrix) -> Result<f64> {
    if s.dim() < 2 {
        return Err(Error::Domain(
            "scalar tuning formulas need at least two variables".into(),
        ));
    }
    let diag = s.diagonal();
    if let Some(k) = diag.iter().position(|&d| d.is_nan() || d <= 0.0) {
        return Err(Error::Domain(format!(
            "diagonal entry {k} of the covariance is not positive"
        )));
    }
    Ok(diag.into_iter().fold(f64::MIN, f64::max))
}

/// Glasso level `max_i s_ii * t / sqrt(n - 2 + t²)` with
/// `t = t_{n-2}(1 - α / (2p²))`.
pub fn lambda_banerjee(s: &SymMatrix, n: usize, alpha: f64) -> Result<f64> {
    check_n(n)?;
    check_alpha(alpha)?;
    let scale = max_variance(s)?;
    let p = s.dim() as f64;
    Ok(scale * critical_correlation(n as u64 - 2, alpha / (2.0 * p * p))?)
}

/// As [`lambda_banerjee`] with the Bonferroni level `α / (p(p - 1))`.
pub fn lambda_bonferroni(s: &SymMatrix, n: usize, alpha: f64) -> Result<f64> {
    check_n(n)?;
    check_alpha(alpha)?;
    let scale = max_variance(s)?;
    let p = s.dim() as f64;
    Ok(scale * critical_correlation(n as u64 - 2, alpha / (p * (p - 1.0)))?)
}

/// Holm sequence: `λ_k` at level `α / (m + 1 - k)`.
pub fn lambda_holm(n: usize, m: usize, alpha: f64) -> Result<LambdaSequence> {
    lambda_holm_with(n, m, alpha, false)
}

/// Holm sequence, optionally with the two-sided level `α / (2(m + 1 - k))`.
pub fn lambda_holm_with(n: usize, m: usize, alpha: f64, two_sided: bool) -> Result<LambdaSequence> {
    check_n(n)?;
    check_alpha(alpha)?;
    let df = n as u64 - 2;
    let div = if two_sided { 2.0 } else { 1.0 };
    let values = (1..=m)
        .map(|k| critical_correlation(df, alpha / (div * (m + 1 - k) as f64)))
        .collect::<Result<Vec<_>>>()?;
    LambdaSequence::new(values)
}

/// Benjamini–Hochberg sequence: `λ_k` at level `α k / (2m)`.
pub fn lambda_bh(n: usize, m: usize, alpha: f64) -> Result<LambdaSequence> {
    check_n(n)?;
    check_alpha(alpha)?;
    let df = n as u64 - 2;
    let values = (1..=m)
        .map(|k| critical_correlation(df, alpha * k as f64 / (2.0 * m as f64)))
        .collect::<Result<Vec<_>>>()?;
    LambdaSequence::new(values)
}

/// `m` copies of `value`; with it the sorted-ℓ1 penalty is a plain ℓ1 penalty.
pub fn lambda_constant(value: f64, m: usize) -> Result<LambdaSequence> {
    LambdaSequence::new(vec![value; m])
}

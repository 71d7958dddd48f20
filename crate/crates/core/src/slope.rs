//! The sorted-ℓ1 (SLOPE) norm, its dual norm and its proximal operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-increasing, non-negative penalty weights `λ_1 >= ... >= λ_m >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaSequence {
    values: Vec<f64>,
}

impl LambdaSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidLambda(format!(
                    "entry {k} is {v}; entries must be finite and non-negative"
                )));
            }
        }
        if let Some(k) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidLambda(format!(
                "sequence increases at position {}: {} < {}",
                k + 1,
                values[k],
                values[k + 1]
            )));
        }
        Ok(LambdaSequence { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for LambdaSequence {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        LambdaSequence::new(values)
    }
}

impl From<LambdaSequence> for Vec<f64> {
    fn from(l: LambdaSequence) -> Self {
        l.values
    }
}

fn sorted_magnitudes(x: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    a
}

/// `Σ λ_i |x|_(i)` with `|x|_(1) >= ... >= |x|_(m)`.
pub fn sorted_l1(x: &[f64], lambda: &LambdaSequence) -> Result<f64> {
    lambda.check_len(x.len())?;
    Ok(sorted_magnitudes(x)
        .iter()
        .zip(lambda.as_slice())
        .map(|(a, l)| a * l)
        .sum())
}

/// Dual norm of the sorted-ℓ1 norm:
/// `max_k (Σ_{i<=k} |x|_(i)) / (Σ_{i<=k} λ_i)`, skipping prefixes whose λ-sum
/// is zero.
pub fn dual_sorted_l1(x: &[f64], lambda: &LambdaSequence) -> Result<f64> {
    lambda.check_len(x.len())?;
    if lambda.is_all_zero() {
        return Err(Error::InvalidLambda(
            "dual norm is undefined for an all-zero sequence".into(),
        ));
    }
    let mut best = 0.0_f64;
    let (mut xs, mut ls) = (0.0, 0.0);
    for (a, l) in sorted_magnitudes(x).iter().zip(lambda.as_slice()) {
        xs += a;
        ls += l;
        if ls > 0.0 {
            best = best.max(xs / ls);
        }
    }
    // λ is non-increasing, so a zero λ-sum can only occur on a leading
    // prefix, which is impossible once λ_1 > 0.
    Ok(best)
}

/// Proximal operator `argmin_x J_λ(x) + (ρ/2) ||v - x||²`.
///
/// Reduces to the unit prox with weights `λ / ρ` on `|v|` sorted
/// non-increasingly (ties broken by index), solved by a stack-based
/// pool-adjacent-violators pass and clipped at zero. Entries in the
/// shrunk-to-zero set are exactly `0.0`.
pub fn prox_sorted_l1(v: &[f64], lambda: &LambdaSequence, rho: f64) -> Result<Vec<f64>> {
    lambda.check_len(v.len())?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    if let Some(k) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("prox input entry {k}")));
    }
    let m = v.len();
    let mut order: Vec<usize> = (0..m).collect();
    // Stable sort keeps ties in index order.
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));

    let lam = lambda.as_slice();
    // Blocks of (start, len, sum) over sorted positions with non-increasing means.
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(m);
    for (pos, &idx) in order.iter().enumerate() {
        let mut block = (pos, 1usize, v[idx].abs() - lam[pos] / rho);
        while let Some(&(start, len, sum)) = blocks.last() {
            if sum / len as f64 > block.2 / block.1 as f64 {
                break;
            }
            blocks.pop();
            block = (start, len + block.1, sum + block.2);
        }
        blocks.push(block);
    }

    let mut out = vec![0.0; m];
    for &(start, len, sum) in &blocks {
        let value = sum / len as f64;
        if value <= 0.0 {
            // Means are non-increasing, so every later block is clipped too.
            break;
        }
        for &idx in &order[start..start + len] {
            out[idx] = if v[idx] == 0.0 { 0.0 } else { value.copysign(v[idx]) };
        }
    }
    Ok(out)
}

//! Dense symmetric matrices and the small amount of linear algebra the
//! estimators need on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Number of unordered off-diagonal pairs of a `p x p` matrix.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Dense symmetric `p x p` matrix.
///
/// Symmetry is checked on construction with a relative tolerance of `1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite(format!("entry ({i}, {j})")));
                }
                if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Replaces `m` by `(m + m^T) / 2`.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let t = m.transpose();
        Ok(SymMatrix((m + t) * 0.5))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let mut m = DMatrix::zeros(p, p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        SymMatrix::new(m)
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn zeros(p: usize) -> Self {
        SymMatrix(DMatrix::zeros(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Off-diagonal upper triangle in row order:
    /// `(0,1), (0,2), ..., (0,p-1), (1,2), ..., (p-2,p-1)`.
    pub fn upper_triangle(&self) -> Vec<f64> {
        upper_triangle(&self.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        Cholesky::new(self.0.clone()).ok_or(Error::NotPositiveDefinite)
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let inv = self.cholesky()?.inverse();
        SymMatrix::symmetrize(inv)
    }

    pub fn log_det_pd(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::NAN)
    }

    /// `tr(self * other)` for symmetric arguments.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }
}

impl From<SymMatrix> for DMatrix<f64> {
    fn from(m: SymMatrix) -> Self {
        m.0
    }
}

pub(crate) fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(pair_count(p));
    for i in 0..p {
        for j in (i + 1)..p {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Writes `values` into both triangles of `m` (same order as [`upper_triangle`]).
pub(crate) fn fill_off_diagonal(m: &mut DMatrix<f64>, values: &[f64]) {
    let p = m.nrows();
    let mut k = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            m[(i, j)] = values[k];
            m[(j, i)] = values[k];
            k += 1;
        }
    }
}

/// Sample mean and the `1/n`-normalized sample covariance of the rows of `x`.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<(Vec<f64>, SymMatrix)> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Domain("sample covariance of zero rows".into()));
    }
    let weights = vec![1.0; n];
    weighted_moments(x, &weights)
}

/// `tau`-weighted mean `sum tau_j x_j / sum tau_j` and the scatter
/// `(1/n) sum tau_j (x_j - mu)(x_j - mu)^T`.
pub(crate) fn weighted_moments(x: &DMatrix<f64>, tau: &[f64]) -> Result<(Vec<f64>, SymMatrix)> {
    let (n, p) = x.shape();
    if tau.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: tau.len(),
        });
    }
    let total: f64 = tau.iter().sum();
    let mut mu = vec![0.0; p];
    for (j, &t) in tau.iter().enumerate() {
        for (k, m) in mu.iter_mut().enumerate() {
            *m += t * x[(j, k)];
        }
    }
    for m in mu.iter_mut() {
        *m /= total;
    }
    let mut centered = x.clone();
    for j in 0..n {
        let w = tau[j].sqrt();
        for k in 0..p {
            centered[(j, k)] = (x[(j, k)] - mu[k]) * w;
        }
    }
    let scatter = centered.tr_mul(&centered) / n as f64;
    if scatter.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weighted scatter matrix".into()));
    }
    Ok((mu, SymMatrix::symmetrize(scatter)?))
}

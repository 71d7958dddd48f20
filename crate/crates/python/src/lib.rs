//! Python bindings. Matrices cross the boundary as lists of rows.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use slopegraph_core::harness::{run_estimate, EstimateOptions, Estimator, Fit};
use slopegraph_core::netgen::{make_network, sample_dataset, Distribution, NetworkModel, NetworkSpec, Structure};
use slopegraph_core::{slope, stat_fns, tuning, AdmmConfig, Error, LambdaSequence, RngStream, Scheme, SymMatrix, TuningSpec};

fn to_py(err: Error) -> PyErr {
    if err.is_input_error() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn lambda(values: Vec<f64>) -> PyResult<LambdaSequence> {
    LambdaSequence::new(values).map_err(to_py)
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if let Some(k) = rows.iter().position(|r| r.len() != p) {
        return Err(PyValueError::new_err(format!("row {k} has {} entries, expected {p}", rows[k].len())));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Sorted-ℓ1 norm `Σ λ_i |x|_(i)`.
#[pyfunction]
fn sorted_l1(x: Vec<f64>, lam: Vec<f64>) -> PyResult<f64> {
    slope::sorted_l1(&x, &lambda(lam)?).map_err(to_py)
}

#[pyfunction]
fn dual_sorted_l1(x: Vec<f64>, lam: Vec<f64>) -> PyResult<f64> {
    slope::dual_sorted_l1(&x, &lambda(lam)?).map_err(to_py)
}

/// `argmin_x J_λ(x) + (ρ/2) ||v - x||²`.
#[pyfunction]
#[pyo3(signature = (v, lam, rho = 1.0))]
fn prox_sorted_l1(v: Vec<f64>, lam: Vec<f64>, rho: f64) -> PyResult<Vec<f64>> {
    slope::prox_sorted_l1(&v, &lambda(lam)?, rho).map_err(to_py)
}

#[pyfunction]
fn student_t_quantile(df: u64, prob: f64) -> PyResult<f64> {
    stat_fns::student_t_quantile(df, prob).map_err(to_py)
}

/// Penalty sequence of length `p(p-1)/2` for `n` observations.
///
/// `scheme` is one of `banerjee`, `bonferroni`, `holm`, `bh`, `constant`
/// (`alpha` is then the constant value). Banerjee and Bonferroni assume a
/// correlation matrix.
#[pyfunction]
#[pyo3(signature = (scheme, n, p, alpha = 0.05))]
fn lambda_sequence(scheme: &str, n: usize, p: usize, alpha: f64) -> PyResult<Vec<f64>> {
    let m = p * p.saturating_sub(1) / 2;
    let seq = match scheme {
        "holm" => tuning::lambda_holm(n, m, alpha),
        "bh" => tuning::lambda_bh(n, m, alpha),
        "constant" => tuning::lambda_constant(alpha, m),
        "banerjee" | "bonferroni" => {
            let spec = TuningSpec::new(
                if scheme == "banerjee" { Scheme::Banerjee } else { Scheme::Bonferroni },
                alpha,
            );
            spec.sequence(&SymMatrix::identity(p), n)
        }
        other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
    };
    Ok(seq.map_err(to_py)?.as_slice().to_vec())
}

/// Result of a Gslope or Tslope fit.
#[pyclass(frozen, name = "Fit")]
struct PyFit {
    inner: Fit,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn theta(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.theta.as_matrix())
    }

    #[getter]
    fn support(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.support.as_matrix())
    }

    /// 0-based `(i, j)` pairs with `i < j`.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.diagnostics.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.diagnostics.converged
    }

    #[getter]
    fn dual_norm(&self) -> f64 {
        self.inner.diagnostics.dual_norm
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(p={}, edges={}, converged={})",
            self.inner.diagnostics.p,
            self.inner.edges.len(),
            self.inner.diagnostics.converged
        )
    }
}

/// Fits `x` (rows are observations).
///
/// `estimator`: `gslope`, `tslope`, `glasso_banerjee`, `glasso_bonferroni`.
/// `tuning`: `bh` or `holm` for the sorted-ℓ1 estimators.
#[pyfunction]
#[pyo3(signature = (x, estimator = "gslope", tuning = "bh", alpha = 0.05, nu = 4.0, rho = 1.0, tol = 1e-5, max_iter = 2000))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    estimator: &str,
    tuning: &str,
    alpha: f64,
    nu: f64,
    rho: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyFit> {
    let x = matrix_from_rows(&x)?;
    let estimator: Estimator = estimator.parse().map_err(to_py)?;
    let mut options = match estimator {
        Estimator::GlassoBanerjee | Estimator::GlassoBonferroni => EstimateOptions::glasso(estimator, alpha),
        _ => {
            let scheme = match tuning {
                "bh" => Scheme::Bh,
                "holm" => Scheme::Holm,
                other => return Err(PyValueError::new_err(format!("unknown tuning {other:?}"))),
            };
            EstimateOptions::new(estimator, TuningSpec::new(scheme, alpha))
        }
    };
    options.admm = AdmmConfig {
        rho,
        max_iter,
        ..AdmmConfig::default()
    }
    .with_tolerance(tol);
    options.em.nu = nu;
    let fit = py.detach(|| run_estimate(&x, &options)).map_err(to_py)?;
    Ok(PyFit { inner: fit })
}

/// Synthetic network with oracle covariance and precision matrices.
#[pyclass(frozen, name = "NetworkModel")]
struct PyNetworkModel {
    inner: NetworkModel,
}

#[pymethods]
impl PyNetworkModel {
    #[new]
    #[pyo3(signature = (structure, p, seed = 0, n_groups = None, edge_prob = None, v = 0.3, u = 0.1))]
    fn new(
        structure: &str,
        p: usize,
        seed: u64,
        n_groups: Option<usize>,
        edge_prob: Option<f64>,
        v: f64,
        u: f64,
    ) -> PyResult<Self> {
        let structure = match structure {
            "cluster" => Structure::Cluster,
            "random" => Structure::Random,
            other => return Err(PyValueError::new_err(format!("unknown structure {other:?}"))),
        };
        let spec = NetworkSpec {
            structure,
            p,
            n_groups,
            edge_prob,
            v,
            u,
            seed,
        };
        Ok(PyNetworkModel {
            inner: make_network(&spec).map_err(to_py)?,
        })
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.sigma.as_matrix())
    }

    #[getter]
    fn theta(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.theta.as_matrix())
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.adjacency.edges()
    }

    #[getter]
    fn components(&self) -> Vec<Vec<usize>> {
        self.inner.components.clone()
    }

    #[getter]
    fn magnitude_ratio(&self) -> f64 {
        self.inner.magnitude_ratio
    }

    /// `n` draws from `gaussian`, `student` or `mixture` with dispersion `sigma`.
    #[pyo3(signature = (n, distribution = "gaussian", nu = 4.0, seed = 0, stream = 0))]
    fn sample(&self, n: usize, distribution: &str, nu: f64, seed: u64, stream: u64) -> PyResult<Vec<Vec<f64>>> {
        let dist = match distribution {
            "gaussian" => Distribution::Gaussian,
            "student" => Distribution::Student { nu },
            "mixture" => Distribution::Mixture { nu },
            other => return Err(PyValueError::new_err(format!("unknown distribution {other:?}"))),
        };
        let mut rng = RngStream::new(seed, stream);
        let data = sample_dataset(&self.inner, n, dist, &mut rng).map_err(to_py)?;
        Ok(rows_of(&data.x))
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkModel(p={}, edges={}, components={})",
            self.inner.sigma.dim(),
            self.inner.adjacency.edge_count(),
            self.inner.components.len()
        )
    }
}

#[pymodule]
fn slopegraph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sorted_l1, m)?)?;
    m.add_function(wrap_pyfunction!(dual_sorted_l1, m)?)?;
    m.add_function(wrap_pyfunction!(prox_sorted_l1, m)?)?;
    m.add_function(wrap_pyfunction!(student_t_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyNetworkModel>()?;
    Ok(())
}

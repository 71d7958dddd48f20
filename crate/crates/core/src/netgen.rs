//! Synthetic ground truth: cluster and random networks with a controlled
//! magnitude ratio, and Gaussian, t and mixture samplers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::metrics::{connectivity_components, Adjacency};
use crate::stat_fns::{sample_gamma, MvNormal, RngStream};

/// Stream id reserved for drawing the graph itself; data streams use
/// replication indices.
pub const NETWORK_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Cluster,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub structure: Structure,
    pub p: usize,
    /// Cluster only; defaults to `ceil(p / 20)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_groups: Option<usize>,
    /// Within-block probability (cluster, default 0.3) or global probability
    /// (random, default `3 / p`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_prob: Option<f64>,
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_v() -> f64 {
    0.3
}

fn default_u() -> f64 {
    0.1
}

impl NetworkSpec {
    pub fn cluster(p: usize, seed: u64) -> Self {
        NetworkSpec {
            structure: Structure::Cluster,
            p,
            n_groups: None,
            edge_prob: None,
            v: default_v(),
            u: default_u(),
            seed,
        }
    }

    pub fn random(p: usize, seed: u64) -> Self {
        NetworkSpec {
            structure: Structure::Random,
            ..NetworkSpec::cluster(p, seed)
        }
    }

    pub fn groups(&self) -> usize {
        match self.structure {
            Structure::Cluster => self.n_groups.unwrap_or(self.p.div_ceil(20)).max(1),
            Structure::Random => 1,
        }
    }

    pub fn probability(&self) -> f64 {
        self.edge_prob.unwrap_or(match self.structure {
            Structure::Cluster => 0.3,
            Structure::Random => (3.0 / self.p as f64).min(1.0),
        })
    }

    /// `(u + v) / v`.
    pub fn magnitude_ratio(&self) -> f64 {
        (self.u + self.v) / self.v
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::Config(format!("p must be at least 2, got {}", self.p)));
        }
        let prob = self.probability();
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(Error::Config(format!("edge_prob must lie in (0, 1], got {prob}")));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::Config(format!("v must be positive, got {}", self.v)));
        }
        if !self.u.is_finite() {
            return Err(Error::Config("u must be finite".into()));
        }
        if self.structure == Structure::Cluster {
            if self.n_groups == Some(0) || self.groups() > self.p {
                return Err(Error::Config(format!(
                    "n_groups must lie in 1..={}, got {}",
                    self.p,
                    self.groups()
                )));
            }
        } else if self.n_groups.is_some() {
            return Err(Error::Config("n_groups applies to cluster networks only".into()));
        }
        if self.u <= -0.1 {
            log::warn!("u = {} leaves the precision matrix without a positive margin", self.u);
        }
        if self.magnitude_ratio() == 0.0 {
            log::warn!("u = -v gives MR = 0: the diagonal boost cancels v");
        }
        Ok(())
    }

    /// Group of node `i` in the cluster layout (contiguous, near-equal blocks).
    pub fn group_of(&self, i: usize) -> usize {
        i * self.groups() / self.p
    }
}

/// Oracle covariance/precision pair with its true graph.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub spec: NetworkSpec,
    /// Correlation matrix (unit diagonal).
    pub sigma: SymMatrix,
    /// `sigma⁻¹`; off-diagonal zeros match `adjacency` exactly.
    pub theta: SymMatrix,
    pub adjacency: Adjacency,
    pub components: Vec<Vec<usize>>,
    pub magnitude_ratio: f64,
}

fn draw_adjacency(spec: &NetworkSpec, rng: &mut RngStream) -> Adjacency {
    let p = spec.p;
    let prob = spec.probability();
    let mut adj = Adjacency::empty(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let eligible = match spec.structure {
                Structure::Cluster => spec.group_of(i) == spec.group_of(j),
                Structure::Random => true,
            };
            // A uniform is consumed for every pair so the stream layout does
            // not depend on the structure.
            let u = rng.uniform_open0();
            if eligible && u <= prob {
                adj.set(i, j, true);
            }
        }
    }
    adj
}

fn build_model(spec: &NetworkSpec, adjacency: Adjacency) -> Result<NetworkModel> {
    let p = spec.p;
    let raw = DMatrix::from_fn(p, p, |i, j| {
        if i != j && adjacency.has_edge(i, j) {
            spec.v
        } else {
            0.0
        }
    });
    let raw = SymMatrix::new(raw)?;
    let shift = raw.min_eigenvalue().abs() + 0.1 + spec.u;
    let theta_raw = SymMatrix::new(raw.as_matrix() + DMatrix::identity(p, p) * shift)?;
    let sigma_raw = theta_raw.inverse_pd()?;

    // Rescaling Σ to unit diagonal is a diagonal congruence, so the matching
    // precision is D^{1/2} Θ D^{1/2} and the zero pattern is kept exactly.
    let d: Vec<f64> = sigma_raw.diagonal().iter().map(|v| v.sqrt()).collect();
    let sigma = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            sigma_raw.get(i, j) / (d[i] * d[j])
        }
    });
    let theta = DMatrix::from_fn(p, p, |i, j| theta_raw.get(i, j) * d[i] * d[j]);
    let components = connectivity_components(&adjacency);
    Ok(NetworkModel {
        spec: spec.clone(),
        sigma: SymMatrix::symmetrize(sigma)?,
        theta: SymMatrix::symmetrize(theta)?,
        adjacency,
        components,
        magnitude_ratio: spec.magnitude_ratio(),
    })
}

/// Draws the graph and builds `Θ = vA + (|λ_min(vA)| + 0.1 + u) I`, then
/// normalizes `Σ = Θ⁻¹` to a correlation matrix.
pub fn make_network(spec: &NetworkSpec) -> Result<NetworkModel> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed, NETWORK_STREAM);
    let first = draw_adjacency(spec, &mut rng);
    match build_model(spec, first) {
        Ok(model) => Ok(model),
        Err(err) => {
            log::warn!("network construction failed ({err}); resampling once");
            build_model(spec, draw_adjacency(spec, &mut rng))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Gaussian,
    Student { nu: f64 },
    /// Each observation is Gaussian or t with probability 1/2.
    Mixture { nu: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Gaussian => Ok(()),
            Distribution::Student { nu } | Distribution::Mixture { nu } => {
                if nu > 2.0 && nu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("nu must be finite and exceed 2, got {nu}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// `n x p` observations.
    pub x: DMatrix<f64>,
    pub distribution: Distribution,
}

/// `n` zero-mean draws with dispersion `model.sigma`.
///
/// Student draws use `X = W / sqrt(τ)` with `W ~ N(0, Σ)`,
/// `τ ~ Gamma(ν/2, rate ν/2)`.
pub fn sample_dataset(
    model: &NetworkModel,
    n: usize,
    distribution: Distribution,
    rng: &mut RngStream,
) -> Result<Dataset> {
    distribution.validate()?;
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let p = model.sigma.dim();
    let normal = MvNormal::new(&vec![0.0; p], &model.sigma)?;
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let student_nu = match distribution {
            Distribution::Gaussian => None,
            Distribution::Student { nu } => Some(nu),
            Distribution::Mixture { nu } => (rng.uniform_open0() > 0.5).then_some(nu),
        };
        let w = normal.sample_centered(rng);
        let scale = match student_nu {
            Some(nu) => 1.0 / sample_gamma(0.5 * nu, 0.5 * nu, rng)?.sqrt(),
            None => 1.0,
        };
        x.row_mut(i).copy_from(&(w * scale).transpose());
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sampled data".into()));
    }
    Ok(Dataset { x, distribution })
}

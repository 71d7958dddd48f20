//! Batch workflows behind the command-line tool: generate synthetic models,
//! estimate from data, and run replicated simulation studies.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gslope::{check_dual_feasibility, estimate_gslope, extract_graph, standardize_to_correlation, AdmmConfig};
use crate::io::{format_f64, read_adjacency_csv, read_edges_csv, read_matrix_csv, write_adjacency_csv, write_data_csv, write_edges_csv, write_json, write_matrix_csv};
use crate::matrix::{sample_covariance, weighted_moments, SymMatrix};
use crate::metrics::{evaluate, evaluate_against, Adjacency, MetricsReport};
use crate::netgen::{make_network, sample_dataset, Distribution, NetworkModel, NetworkSpec};
use crate::slope::LambdaSequence;
use crate::stat_fns::RngStream;
use crate::tslope::{estimate_tslope, EmConfig};
use crate::tuning::{lambda_banerjee, lambda_bonferroni, lambda_constant, Scheme, TuningSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Gslope,
    Tslope,
    GlassoBanerjee,
    GlassoBonferroni,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown estimator {s:?}")))
    }
}

/// Settings of the EM outer loop; the inner solver uses the ADMM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmSettings {
    pub nu: f64,
    pub epsilon: f64,
    pub max_em_iter: usize,
    pub standardize: bool,
}

impl Default for EmSettings {
    fn default() -> Self {
        let d = EmConfig::default();
        EmSettings {
            nu: d.nu,
            epsilon: d.epsilon,
            max_em_iter: d.max_em_iter,
            standardize: d.standardize,
        }
    }
}

/// Everything needed to turn a data matrix into a graph estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateOptions {
    pub estimator: Estimator,
    /// Ignored by the Glasso estimators except for `alpha`.
    #[serde(default = "default_tuning")]
    pub tuning: TuningSpec,
    #[serde(default)]
    pub admm: AdmmConfig,
    #[serde(default)]
    pub em: EmSettings,
}

fn default_tuning() -> TuningSpec {
    TuningSpec::new(Scheme::Bh, 0.05)
}

impl EstimateOptions {
    pub fn new(estimator: Estimator, tuning: TuningSpec) -> Self {
        EstimateOptions {
            estimator,
            tuning,
            admm: AdmmConfig::default(),
            em: EmSettings::default(),
        }
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            nu: self.em.nu,
            epsilon: self.em.epsilon,
            max_em_iter: self.em.max_em_iter,
            inner: self.admm,
            standardize: self.em.standardize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tuning.validate()?;
        self.admm.validate()?;
        match (self.estimator, self.tuning.scheme) {
            (Estimator::GlassoBanerjee, s) if s != Scheme::Banerjee => Err(Error::Config(format!(
                "glasso_banerjee requires the banerjee tuning scheme, got {s:?}"
            ))),
            (Estimator::GlassoBonferroni, s) if s != Scheme::Bonferroni => Err(Error::Config(format!(
                "glasso_bonferroni requires the bonferroni tuning scheme, got {s:?}"
            ))),
            (Estimator::Tslope, _) => self.em_config().validate(),
            _ => Ok(()),
        }
    }

    /// Options for a Glasso estimator with its forced tuning scheme.
    pub fn glasso(estimator: Estimator, alpha: f64) -> Self {
        let scheme = match estimator {
            Estimator::GlassoBonferroni => Scheme::Bonferroni,
            _ => Scheme::Banerjee,
        };
        EstimateOptions::new(estimator, TuningSpec::new(scheme, alpha))
    }
}

/// Penalty sequence for `x` under `options`, computed on the correlation
/// scale so the variance factor of the Glasso formulas is 1.
pub fn lambda_for(x: &DMatrix<f64>, options: &EstimateOptions) -> Result<LambdaSequence> {
    let (n, p) = x.shape();
    if p < 2 {
        return Err(Error::Domain(format!("need at least 2 variables, got {p}")));
    }
    let (_, s) = sample_covariance(x)?;
    let (r, _) = standardize_to_correlation(&s)?;
    let m = p * (p - 1) / 2;
    match options.estimator {
        Estimator::GlassoBanerjee => lambda_constant(lambda_banerjee(&r, n, options.tuning.alpha)?, m),
        Estimator::GlassoBonferroni => lambda_constant(lambda_bonferroni(&r, n, options.tuning.alpha)?, m),
        Estimator::Gslope | Estimator::Tslope => options.tuning.sequence(&r, n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub estimator: Estimator,
    pub n: usize,
    pub p: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub objective: f64,
    pub dual_norm: f64,
    pub dual_feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_iterations: Option<usize>,
    pub edge_count: usize,
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub theta: SymMatrix,
    pub support: SymMatrix,
    /// 0-based `(i, j)`, `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub diagnostics: Diagnostics,
}

/// Fits the configured estimator to the rows of `x`.
pub fn run_estimate(x: &DMatrix<f64>, options: &EstimateOptions) -> Result<Fit> {
    options.validate()?;
    let (n, p) = x.shape();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("data matrix".into()));
    }
    let lambda = lambda_for(x, options)?;
    let (est, scatter, em_iterations, converged) = match options.estimator {
        Estimator::Tslope => {
            let t = estimate_tslope(x, &lambda, &options.em_config())?;
            let (_, s) = weighted_moments(x, &t.tau_weights)?;
            let converged = t.converged && t.theta.converged;
            (t.theta, s, Some(t.em_iterations), converged)
        }
        _ => {
            let (_, s) = sample_covariance(x)?;
            let est = estimate_gslope(&s, &lambda, &options.admm)?;
            let converged = est.converged;
            (est, s, None, converged)
        }
    };
    let (dual_feasible, dual_norm) = if lambda.is_all_zero() {
        (true, 0.0)
    } else {
        check_dual_feasibility(&est, &scatter, &lambda)?
    };
    let edges = extract_graph(&est);
    let l = lambda.as_slice();
    let diagnostics = Diagnostics {
        estimator: options.estimator,
        n,
        p,
        lambda_max: l.first().copied().unwrap_or(0.0),
        lambda_min: l.last().copied().unwrap_or(0.0),
        iterations: est.iterations,
        primal_residual: est.primal_residual,
        dual_residual: est.dual_residual,
        converged,
        objective: est.objective,
        dual_norm,
        dual_feasible,
        em_iterations,
        edge_count: edges.len(),
    };
    Ok(Fit {
        theta: est.theta,
        support: est.support,
        edges,
        diagnostics,
    })
}

/// Writes `theta_hat.csv`, `support.csv`, `edges.csv` and `diagnostics.json`.
pub fn write_estimate(out: &Path, fit: &Fit) -> Result<()> {
    write_matrix_csv(&out.join("theta_hat.csv"), fit.theta.as_matrix())?;
    write_matrix_csv(&out.join("support.csv"), fit.support.as_matrix())?;
    write_edges_csv(&out.join("edges.csv"), &fit.edges)?;
    write_json(&out.join("diagnostics.json"), &fit.diagnostics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub network: NetworkSpec,
    pub n: usize,
    #[serde(default = "default_distribution")]
    pub distribution: Distribution,
    /// Seed of the data stream; defaults to the network seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
}

fn default_distribution() -> Distribution {
    Distribution::Gaussian
}

#[derive(Debug, Clone, Serialize)]
struct GenerateMeta<'a> {
    config: &'a GenerateConfig,
    data_seed: u64,
    magnitude_ratio: f64,
    edge_count: usize,
    component_count: usize,
}

/// Draws a network and a dataset, then writes `sigma.csv`, `theta.csv`,
/// `adjacency.csv`, `data.csv` and `meta.json`.
pub fn run_generate(config: &GenerateConfig, out: &Path) -> Result<(NetworkModel, DMatrix<f64>)> {
    let model = make_network(&config.network)?;
    let data_seed = config.data_seed.unwrap_or(config.network.seed);
    let mut rng = RngStream::new(data_seed, 0);
    let data = sample_dataset(&model, config.n, config.distribution, &mut rng)?;

    std::fs::create_dir_all(out)?;
    write_matrix_csv(&out.join("sigma.csv"), model.sigma.as_matrix())?;
    write_matrix_csv(&out.join("theta.csv"), model.theta.as_matrix())?;
    write_adjacency_csv(&out.join("adjacency.csv"), &model.adjacency)?;
    write_data_csv(&out.join("data.csv"), &data.x, None)?;
    let meta = GenerateMeta {
        config,
        data_seed,
        magnitude_ratio: model.magnitude_ratio,
        edge_count: model.adjacency.edge_count(),
        component_count: model.components.len(),
    };
    write_json(&out.join("meta.json"), &meta)?;
    Ok((model, data.x))
}

/// Scores an estimate directory against a truth directory written by
/// [`run_generate`].
pub fn run_report(estimate_dir: &Path, truth_dir: &Path) -> Result<MetricsReport> {
    let theta = SymMatrix::symmetrize(read_matrix_csv(&truth_dir.join("theta.csv"))?)?;
    let adjacency: Adjacency = read_adjacency_csv(&truth_dir.join("adjacency.csv"))?;
    let theta_hat = SymMatrix::symmetrize(read_matrix_csv(&estimate_dir.join("theta_hat.csv"))?)?;
    let edges = read_edges_csv(&estimate_dir.join("edges.csv"))?;
    evaluate_against(&edges, &theta_hat, &theta, &adjacency)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Drawn once from `network.seed` and shared by all replications.
    pub network: NetworkSpec,
    pub n: usize,
    #[serde(default = "default_distribution")]
    pub distribution: Distribution,
    pub estimator: Estimator,
    #[serde(default = "default_tuning")]
    pub tuning: TuningSpec,
    pub replications: usize,
    /// Replication `r` draws its data from stream `r` of this seed.
    pub master_seed: u64,
    #[serde(default)]
    pub admm: AdmmConfig,
    #[serde(default)]
    pub em: EmSettings,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<std::path::PathBuf>,
}

impl SimulationConfig {
    pub fn estimate_options(&self) -> EstimateOptions {
        EstimateOptions {
            estimator: self.estimator,
            tuning: self.tuning.clone(),
            admm: self.admm,
            em: self.em,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(Error::Config(format!("n must be at least 3, got {}", self.n)));
        }
        self.network.validate()?;
        self.distribution.validate()?;
        self.estimate_options().validate()
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub metrics: Option<MetricsReport>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Summary {
    /// Mean and sample standard deviation (0 for a single value); `None` when
    /// `values` is empty.
    pub fn of(values: &[f64]) -> Option<Summary> {
        let count = values.len();
        if count == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, sd, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureNote {
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub magnitude_ratio: f64,
    pub true_edges: usize,
    pub replications: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub f1: Option<Summary>,
    pub frobenius: Option<Summary>,
    pub power: Option<Summary>,
    pub dfdr: Option<Summary>,
    /// Fraction of successful replications with a cross-component discovery.
    pub fwer: Option<f64>,
    pub converged_fraction: Option<f64>,
    pub failures: Vec<FailureNote>,
}

/// Data generation, fit and scoring for replication `rep`.
pub fn run_replication(
    config: &SimulationConfig,
    model: &NetworkModel,
    options: &EstimateOptions,
    rep: usize,
) -> Result<(MetricsReport, Fit)> {
    let mut rng = RngStream::new(config.master_seed, rep as u64);
    let data = sample_dataset(model, config.n, config.distribution, &mut rng)?;
    let fit = run_estimate(&data.x, options)?;
    let metrics = evaluate(&fit.edges, &fit.theta, model)?;
    Ok((metrics, fit))
}

/// Runs all replications on a pool of `jobs` threads (`0`: rayon default).
/// Results are ordered by replication index whatever the scheduling.
pub fn run_simulation(config: &SimulationConfig, jobs: usize) -> Result<(SimulationReport, Vec<ReplicationRecord>)> {
    config.validate()?;
    let model = make_network(&config.network)?;
    let options = config.estimate_options();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let records: Vec<ReplicationRecord> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| match run_replication(config, &model, &options, rep) {
                Ok((metrics, fit)) => ReplicationRecord {
                    replication: rep,
                    metrics: Some(metrics),
                    iterations: Some(fit.diagnostics.iterations),
                    converged: Some(fit.diagnostics.converged),
                    error: None,
                },
                Err(e) => {
                    log::warn!("replication {rep} failed: {e}");
                    ReplicationRecord {
                        replication: rep,
                        metrics: None,
                        iterations: None,
                        converged: None,
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect()
    });
    let report = aggregate(config, &model, &records)?;
    Ok((report, records))
}

fn aggregate(config: &SimulationConfig, model: &NetworkModel, records: &[ReplicationRecord]) -> Result<SimulationReport> {
    let ok: Vec<&MetricsReport> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let failures: Vec<FailureNote> = records
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| FailureNote {
                replication: r.replication,
                error: e.clone(),
            })
        })
        .collect();
    if ok.is_empty() {
        let first = failures.first().map(|f| f.error.clone()).unwrap_or_default();
        return Err(Error::AllReplicationsFailed(records.len(), first));
    }
    let collect = |f: fn(&MetricsReport) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<f64>>();
    let powers: Vec<f64> = ok.iter().filter_map(|m| m.power).collect();
    let fwer = ok.iter().filter(|m| m.fwer_event).count() as f64 / ok.len() as f64;
    let converged = records.iter().filter(|r| r.converged == Some(true)).count() as f64 / ok.len() as f64;
    Ok(SimulationReport {
        config: config.clone(),
        magnitude_ratio: model.magnitude_ratio,
        true_edges: model.adjacency.edge_count(),
        replications: records.len(),
        succeeded: ok.len(),
        failed: failures.len(),
        f1: Summary::of(&collect(|m| m.f1)),
        frobenius: Summary::of(&collect(|m| m.frobenius)),
        power: Summary::of(&powers),
        dfdr: Summary::of(&collect(|m| m.dfdr)),
        fwer: Some(fwer),
        converged_fraction: Some(converged),
        failures,
    })
}

const REPLICATION_COLUMNS: [&str; 16] = [
    "replication", "status", "tp", "fp", "fn", "tn", "f1", "frobenius", "v_distant", "r_total", "dfdr",
    "fwer_event", "power", "iterations", "converged", "error",
];

/// Writes `report.json` and `replications.csv`.
pub fn write_simulation(out: &Path, report: &SimulationReport, records: &[ReplicationRecord]) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), report)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(out.join("replications.csv"))?;
    w.write_record(REPLICATION_COLUMNS)?;
    for r in records {
        let mut row = vec![r.replication.to_string()];
        match &r.metrics {
            Some(m) => {
                row.push("ok".into());
                row.extend([m.tp, m.fp, m.fn_, m.tn].map(|c| c.to_string()));
                row.push(format_f64(m.f1));
                row.push(format_f64(m.frobenius));
                row.push(m.v_distant.to_string());
                row.push(m.r_total.to_string());
                row.push(format_f64(m.dfdr));
                row.push(m.fwer_event.to_string());
                row.push(m.power.map(format_f64).unwrap_or_default());
            }
            None => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 11));
            }
        }
        row.push(r.iterations.map(|i| i.to_string()).unwrap_or_default());
        row.push(r.converged.map(|c| c.to_string()).unwrap_or_default());
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

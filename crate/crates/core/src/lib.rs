//! Sparse Gaussian and t graphical models with the sorted-ℓ1 penalty.
//!
//! - [`slope`]: the sorted-ℓ1 norm, its dual and its proximal operator.
//! - [`tuning`]: penalty sequences from multiple-testing corrections.
//! - [`gslope`]: penalized Gaussian likelihood solved by ADMM.
//! - [`tslope`]: EM for the multivariate t model around the Gaussian solver.
//! - [`netgen`]: synthetic networks and data.
//! - [`metrics`]: graph-recovery metrics.
//! - [`harness`]: batch workflows used by the command-line tool.

pub mod error;
pub mod gslope;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod netgen;
pub mod slope;
pub mod stat_fns;
pub mod tslope;
pub mod tuning;

pub use error::{Error, Result};
pub use gslope::{
    check_dual_feasibility, estimate_gslope, extract_graph, solve_gslope, AdmmConfig, PrecisionEstimate,
};
pub use matrix::{sample_covariance, SymMatrix};
pub use metrics::{evaluate, Adjacency, MetricsReport};
pub use netgen::{make_network, sample_dataset, Dataset, Distribution, NetworkModel, NetworkSpec, Structure};
pub use slope::{dual_sorted_l1, prox_sorted_l1, sorted_l1, LambdaSequence};
pub use stat_fns::{student_t_quantile, RngStream};
pub use tslope::{estimate_tslope, EmConfig, TslopeEstimate};
pub use tuning::{Scheme, TuningSpec};

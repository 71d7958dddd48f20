use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slopegraph::harness::{
    run_estimate, run_generate, run_report, run_simulation, write_estimate, write_simulation, EstimateOptions,
    Estimator, GenerateConfig, SimulationConfig,
};
use slopegraph::io::{read_json_config, read_table_csv, write_json};
use slopegraph::{AdmmConfig, Error, Scheme, TuningSpec};

#[derive(Parser)]
#[command(name = "slopegraph", version, about = "Sparse graphical models with the sorted-L1 penalty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic network and dataset from a JSON config.
    Generate(GenerateArgs),
    /// Estimate a sparse precision matrix from a CSV data file.
    Estimate(EstimateArgs),
    /// Run a replicated simulation study from a JSON config.
    Simulate(SimulateArgs),
    /// Score an estimate directory against a generated truth directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    config: PathBuf,
    /// Overrides `network.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Gslope,
    Tslope,
    GlassoBanerjee,
    GlassoBonferroni,
}

#[derive(Clone, Copy, ValueEnum)]
enum TuningArg {
    Bh,
    Holm,
    Constant,
}

#[derive(Args)]
struct EstimateArgs {
    data: PathBuf,
    #[arg(long, value_enum, default_value = "gslope")]
    estimator: EstimatorArg,
    /// Penalty sequence for gslope/tslope.
    #[arg(long, value_enum, default_value = "bh")]
    tuning: TuningArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Penalty level for `--tuning constant`.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 4.0)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory with theta_hat.csv and edges.csv.
    #[arg(long)]
    estimate: PathBuf,
    /// Directory with theta.csv and adjacency.csv.
    #[arg(long)]
    truth: PathBuf,
    /// Also write metrics.json here.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn estimate_options(args: &EstimateArgs) -> EstimateOptions {
    let estimator = match args.estimator {
        EstimatorArg::Gslope => Estimator::Gslope,
        EstimatorArg::Tslope => Estimator::Tslope,
        EstimatorArg::GlassoBanerjee => Estimator::GlassoBanerjee,
        EstimatorArg::GlassoBonferroni => Estimator::GlassoBonferroni,
    };
    let mut options = match estimator {
        Estimator::GlassoBanerjee | Estimator::GlassoBonferroni => EstimateOptions::glasso(estimator, args.alpha),
        _ => {
            let tuning = match args.tuning {
                TuningArg::Bh => TuningSpec::new(Scheme::Bh, args.alpha),
                TuningArg::Holm => TuningSpec::new(Scheme::Holm, args.alpha),
                TuningArg::Constant => TuningSpec::constant(args.lambda),
            };
            EstimateOptions::new(estimator, tuning)
        }
    };
    options.admm = AdmmConfig {
        rho: args.rho,
        max_iter: args.max_iter,
        ..AdmmConfig::default()
    }
    .with_tolerance(args.tol);
    options.em.nu = args.nu;
    options
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let mut config: GenerateConfig = read_json_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.network.seed = seed;
    }
    let (model, data) = run_generate(&config, &args.output_dir)?;
    log::info!(
        "wrote p={} n={} with {} edges to {}",
        model.sigma.dim(),
        data.nrows(),
        model.adjacency.edge_count(),
        args.output_dir.display()
    );
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Error> {
    let options = estimate_options(&args);
    let table = read_table_csv(&args.data)?;
    let fit = run_estimate(&table.values, &options)?;
    write_estimate(&args.output_dir, &fit)?;
    if !fit.diagnostics.converged {
        log::warn!("solver did not converge; see diagnostics.json");
    }
    log::info!("{} edges written to {}", fit.edges.len(), args.output_dir.display());
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut config: SimulationConfig = read_json_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let out = args
        .output_dir
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let (report, records) = run_simulation(&config, args.jobs)?;
    write_simulation(&out, &report, &records)?;
    log::info!(
        "{}/{} replications succeeded; report in {}",
        report.succeeded,
        report.replications,
        out.display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Error> {
    let metrics = run_report(&args.estimate, &args.truth)?;
    if let Some(out) = &args.output_dir {
        write_json(&out.join("metrics.json"), &metrics)?;
    }
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        e if e.is_input_error() => 2,
        _ => 1,
    }
}

fn input_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Generate(a) => Some(&a.config),
        Command::Estimate(a) => Some(&a.data),
        Command::Simulate(a) => Some(&a.config),
        Command::Report(_) => None,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLOPEGRAPH_LOG", "warn")).init();
    let cli = Cli::parse();
    let source = input_path(&cli.command).map(|p| p.display().to_string());
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match (&err, source) {
                (Error::Io(_), Some(src)) => eprintln!("error: {src}: {err}"),
                _ => eprintln!("error: {err}"),
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

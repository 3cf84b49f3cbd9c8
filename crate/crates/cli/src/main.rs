//! `eivglm`: simulation runs, fits on replicate data and noise estimation.

mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use eivglm::eiv::estimate_me_precision_diag;
use eivglm::iro::{run_iro, Aggregation, IroConfig, IroResult, NoiseSpec};
use eivglm::sim::{run_experiment, to_csv, NoiseMode, Setting, SimulationSpec};
use eivglm::solvers::{FamilySpec, PenaltyKind};

use input::SCHEMA_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<eivglm::Error> for CliError {
    fn from(e: eivglm::Error) -> Self {
        use eivglm::Error as E;
        let msg = e.to_string();
        match e {
            E::Domain(_) | E::DimensionMismatch { .. } => CliError::Usage(msg),
            E::DegenerateNoise { .. } | E::NoiseUnavailable(_) | E::DegenerateFit(_) | E::SingleClassFold => {
                CliError::Degenerate(msg)
            }
            E::Convergence { .. } => CliError::Solver(msg),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "eivglm", version, about = "Penalized GLMs with replicate-measured covariates")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "EIVGLM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo comparison of the Ideal, Naive and IRO estimators.
    Simulate(SimulateArgs),
    /// Runs IRO on a replicate data document.
    Fit(FitArgs),
    /// Estimates the measurement-error variances from replicates.
    Noise(NoiseArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Gaussian,
    Binomial,
    Negbin,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PenaltyArg {
    Lasso,
    Mcp,
    ScaledLasso,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Lasso => PenaltyKind::Lasso,
            PenaltyArg::Mcp => PenaltyKind::Mcp,
            PenaltyArg::ScaledLasso => PenaltyKind::ScaledLasso,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    Known,
    Estimate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggregationArg {
    Median,
    Mean,
    Trimmed,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// One of G1, G2, G3, B1, B2.
    #[arg(long)]
    setting: String,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Noise-to-signal ratio of the replicates.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 3)]
    replicates: usize,
    /// Monte Carlo instances.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, value_enum, default_value = "mcp")]
    penalty: PenaltyArg,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 20)]
    burnin: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Whether the IRO arm is given the true noise precision.
    #[arg(long, value_enum, default_value = "known")]
    noise: NoiseArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; a JSON mirror is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Allow more than 100 instances or p above 2000.
    #[arg(long)]
    yes_long: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "mcp")]
    penalty: PenaltyArg,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 20)]
    burnin: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, value_enum, default_value = "median")]
    aggregation: AggregationArg,
    /// Fraction trimmed from each tail with `--aggregation trimmed`.
    #[arg(long, default_value_t = 0.1)]
    trim: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn to_json<S: Serialize>(value: &S) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
    bytes.push(b'\n');
    bytes
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let setting: Setting = args.setting.parse()?;
    if (args.instances > 100 || args.p > 2000) && !args.yes_long {
        return Err(CliError::Usage(
            "more than 100 instances or p > 2000 can run for hours; pass --yes-long to proceed".into(),
        ));
    }
    let spec = SimulationSpec {
        setting,
        n: args.n,
        p: args.p,
        gamma: args.gamma,
        replicates: args.replicates,
        penalty_kind: args.penalty.into(),
        n_monte_carlo: args.instances,
        seed: args.seed,
        iterations: args.iterations,
        burn_in: args.burnin,
        folds: args.folds,
        noise: match args.noise {
            NoiseArg::Known => NoiseMode::Known,
            NoiseArg::Estimate => NoiseMode::Estimate,
        },
        ..SimulationSpec::default()
    };
    let table = run_experiment(&spec)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": spec,
        "rows": table.rows,
        "instances": table.instances,
    });
    output::write_all(&[
        (args.out.clone(), to_csv(&table).into_bytes()),
        (output::json_mirror(&args.out), to_json(&doc)),
    ])
}

#[derive(Serialize)]
struct TraceSummary {
    iteration: usize,
    lambda: f64,
    nuisance: Option<f64>,
    intercept: f64,
    support_size: usize,
    l1_norm: f64,
}

fn fit_document(args: &FitArgs, config: &IroConfig<f64>, result: &IroResult<f64>) -> serde_json::Value {
    let support: Vec<usize> = (0..result.beta_hat.len()).filter(|&j| result.beta_hat[j] != 0.0).collect();
    let trace: Vec<TraceSummary> = result
        .trace
        .retained
        .iter()
        .map(|e| TraceSummary {
            iteration: e.iteration,
            lambda: e.lambda,
            nuisance: e.nuisance,
            intercept: e.intercept,
            support_size: e.beta.iter().filter(|b| **b != 0.0).count(),
            l1_norm: e.beta.iter().map(|b| b.abs()).sum(),
        })
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "config": {
            "data": args.data,
            "iro": config,
        },
        "beta_hat": result.beta_hat.to_vec(),
        "intercept_hat": result.intercept_hat,
        "support": support,
        "trace": trace,
        "diagnostics": result.diagnostics,
        "omega_u_diag": result.omega_u_diag.to_vec(),
        "noise_estimated": result.noise_estimated,
        "omega_x_final": result.omega_x_final.to_vec(),
        "omega_x_floored": result.omega_x_floored,
        "nuisance_final": result.nuisance_final,
    })
}

fn fit(args: &FitArgs) -> Result<(), CliError> {
    let input = input::read(&args.data)?;
    input::check_response(&input, args.family)?;
    let family = match args.family {
        FamilyArg::Gaussian => FamilySpec::gaussian(),
        FamilyArg::Binomial => FamilySpec::Binomial,
        FamilyArg::Negbin => FamilySpec::NegativeBinomial {
            trials: input.trials.clone().expect("checked with the response"),
        },
    };
    let config = IroConfig {
        iterations: args.iterations,
        burn_in: args.burnin,
        family,
        penalty_kind: args.penalty.into(),
        folds: args.folds,
        aggregation: match args.aggregation {
            AggregationArg::Median => Aggregation::Median,
            AggregationArg::Mean => Aggregation::Mean,
            AggregationArg::Trimmed => Aggregation::Trimmed { alpha: args.trim },
        },
        seed: args.seed,
        ..IroConfig::default()
    };
    let noise = match &input.omega_u_diag {
        Some(o) => NoiseSpec::known(o.clone()),
        None => NoiseSpec::Estimate,
    };
    let result = run_iro(&input.data, &noise, &config).map_err(|e| {
        let at = e.iteration;
        match CliError::from(e.into_inner()) {
            CliError::Usage(m) => CliError::Usage(m),
            CliError::Degenerate(m) => CliError::Degenerate(format!("iteration {at}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("iteration {at}: {m}")),
        }
    })?;
    output::write_all(&[(args.out.clone(), to_json(&fit_document(args, &config, &result)))])
}

fn noise(args: &NoiseArgs) -> Result<(), CliError> {
    let input = input::read(&args.data)?;
    if let Some(i) = input.data.replicate_counts().iter().position(|&r| r < 2) {
        return Err(CliError::Usage(format!(
            "observation {i} has a single replicate; noise estimation needs r_i >= 2 everywhere"
        )));
    }
    let est = estimate_me_precision_diag(&input.data)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "noise",
        "config": { "data": args.data },
        "sigma_u_diag": est.sigma_u_diag.to_vec(),
        "omega_u_diag": est.omega_u_diag.to_vec(),
        "contributing": est.contributing,
    });
    output::write_all(&[(args.out.clone(), to_json(&doc))])
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Noise(a) => noise(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eivglm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

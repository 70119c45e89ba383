//! `padmm`: run, validate, and plan private decentralized ADMM experiments.

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use padmm_core::accountant::Algorithm;
use padmm_core::experiment::{plan_for, run_experiment, ExperimentConfig, SeedSetup, SourceData};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(
    name = "padmm",
    version,
    about = "Differentially private decentralized ADMM experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write the NDJSON report.
    Run(ConfigArgs),
    /// Check a config (and its budget plan) without training.
    Validate(ConfigArgs),
    /// Print the budget plan for the given parameters as JSON.
    Plan(PlanArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// One flag per config key; a flag beats the file.
#[derive(Debug, Default, Args)]
struct Overrides {
    /// nonprivate | pp_admm | ipp_admm
    #[arg(long)]
    algorithm: Option<String>,
    /// synthetic | csv
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    csv_path: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    positive_label: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    n_agents: Option<usize>,
    /// ring | complete | random
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Number of rounds.
    #[arg(long = "T", visible_alias = "rounds")]
    rounds: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    splits: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    lambda_hat: Option<f64>,
    /// sufficient | exact
    #[arg(long)]
    rho_conversion: Option<String>,
    #[arg(long)]
    c_max: Option<usize>,
    #[arg(long)]
    c_loss: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    svt_budget_fraction: Option<f64>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    accept_unconverged: bool,
    /// Disable all noise. The run is NOT private.
    #[arg(long)]
    insecure_no_noise: bool,
}

impl Overrides {
    fn apply(&self, cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut value = serde_json::to_value(&cfg)?;
        let map = value.as_object_mut().expect("config serializes to an object");
        macro_rules! set {
            ($($field:ident),* $(,)?) => {$(
                if let Some(v) = &self.$field {
                    map.insert(stringify!($field).to_string(), serde_json::to_value(v)?);
                }
            )*};
        }
        set!(
            algorithm,
            dataset,
            csv_path,
            label_column,
            positive_label,
            samples,
            features,
            separation,
            data_seed,
            n_agents,
            topology,
            edge_prob,
            epsilon,
            delta,
            rounds,
            eta,
            splits,
            beta,
            max_iterations,
            lambda_hat,
            rho_conversion,
            c_max,
            c_loss,
            alpha,
            svt_budget_fraction,
            seeds,
            test_fraction,
            output,
        );
        if self.accept_unconverged {
            map.insert("accept_unconverged".into(), Value::Bool(true));
        }
        if self.insecure_no_noise {
            map.insert("insecure_no_noise".into(), Value::Bool(true));
        }
        serde_json::from_value(value).context("invalid override")
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let cfg = self.overrides.apply(base)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// pp_admm | ipp_admm
    #[arg(long, default_value = "pp_admm")]
    algorithm: String,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long = "T", visible_alias = "rounds", default_value_t = 30)]
    rounds: usize,
    #[arg(long, default_value_t = 0.001)]
    splits: f64,
    #[arg(long, default_value_t = 5)]
    n_agents: usize,
    /// Per-agent sample counts (comma-separated); one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "7000")]
    dataset_size: Vec<usize>,
    /// Per-agent neighbor counts (comma-separated); one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    degree: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 15)]
    c_max: usize,
    #[arg(long, default_value_t = 0.1)]
    svt_budget_fraction: f64,
    #[arg(long)]
    lambda_hat: Option<f64>,
    /// exact | sufficient (`sufficient` is ε²/(4 ln(1/δ)), which converts back
    /// to slightly more than ε)
    #[arg(long, default_value = "exact")]
    rho_conversion: String,
}

fn per_agent(values: &[usize], n: usize, what: &str) -> Result<Vec<usize>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => bail!("{len} values for --{what}, expected 1 or {n}"),
    }
}

fn plan(args: &PlanArgs) -> Result<()> {
    let algorithm: Algorithm =
        serde_json::from_value(Value::String(args.algorithm.clone())).context("unknown --algorithm")?;
    if algorithm == Algorithm::Nonprivate {
        bail!("a non-private run has no privacy budget to plan");
    }
    let defaults = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        algorithm,
        epsilon: args.epsilon,
        delta: args.delta,
        rounds: args.rounds,
        splits: args.splits,
        n_agents: args.n_agents,
        eta: args.eta,
        beta: args.beta.unwrap_or(defaults.beta),
        c_max: args.c_max,
        svt_budget_fraction: args.svt_budget_fraction,
        lambda_hat: args.lambda_hat,
        rho_conversion: serde_json::from_value(Value::String(args.rho_conversion.clone()))
            .context("unknown --rho-conversion")?,
        ..defaults
    };
    let sizes = per_agent(&args.dataset_size, args.n_agents, "dataset-size")?;
    let degrees = per_agent(&args.degree, args.n_agents, "degree")?;
    let plan = plan_for(&cfg, sizes, degrees)?.expect("private algorithms always plan");
    println!("{}", serde_json::to_string_pretty(&plan)?);
    Ok(())
}

fn warn_insecure(cfg: &ExperimentConfig) {
    if cfg.insecure_no_noise {
        eprintln!("WARNING: --insecure-no-noise is set. No noise is added; this run is NOT differentially private and epsilon is reported as infinite.");
    }
}

fn run(args: &ConfigArgs) -> Result<()> {
    let cfg = args.resolve()?;
    warn_insecure(&cfg);
    let report = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            report.write_ndjson(BufWriter::new(file))?;
        }
        None => report.write_ndjson(io::stdout().lock())?,
    }
    if let (Some(loss), Some(err)) = (report.final_mean_loss(), report.final_mean_error()) {
        eprintln!(
            "{} seed(s), {} rounds: final mean loss {loss:.6}, mean test error {err:.4}",
            report.seeds.len(),
            cfg.rounds
        );
    }
    Ok(())
}

fn validate(args: &ConfigArgs) -> Result<()> {
    let cfg = args.resolve()?;
    warn_insecure(&cfg);
    let source = SourceData::load(&cfg)?;
    for &seed in &cfg.seeds {
        let setup = SeedSetup::new(&cfg, &source, seed).with_context(|| format!("seed {seed}"))?;
        if let Some(plan) = &setup.plan {
            eprintln!(
                "seed {seed}: lambda_hat {:.6} (floor {:.6}), rho_total {:.6e}",
                plan.lambda_hat,
                plan.lambda_hat_floor,
                plan.rho_total.rho()
            );
        }
    }
    println!(
        "config OK: {} samples, {} seed(s)",
        source.data().len(),
        cfg.seeds.len()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::Plan(args) => plan(args),
    }
}

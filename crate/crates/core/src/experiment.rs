//! Experiment runner: configuration, data preparation, multi-seed runs,
//! aggregation, and newline-delimited JSON reports.
//!
//! Everything a run does is derived from the config, so an identical config
//! yields a byte-identical report.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::accountant::{plan_budget, Algorithm, BudgetPlan, PlanRequest, RhoConversion};
use crate::data::{load_csv, partition, synthetic_blobs, train_test_split, Dataset, Normalizer};
use crate::engine::{run_ipp_admm, run_nonprivate, run_pp_admm, AdmmConfig, IterationTrace, Network, SvtParams};
use crate::error::{Error, Result};
use crate::model::LOGISTIC_C1;
use crate::noise::NoiseMode;
use crate::solver::SolverConfig;
use crate::svt::svt_budget;
use crate::topology::Graph;

/// Regularizer for non-private runs when none is configured. Private runs
/// default to the planned floor instead.
pub const DEFAULT_NONPRIVATE_LAMBDA_HAT: f64 = 1e-2;

/// Fraction of `ε_i1` used to scale the objective noise.
const EPS_I3_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    Complete,
    /// Erdős–Rényi with `edge_prob`, redrawn until connected.
    #[default]
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,

    pub dataset: DatasetKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    pub label_column: String,
    pub positive_label: String,
    /// Synthetic data: sample count, feature count, cluster separation.
    pub samples: usize,
    pub features: usize,
    pub separation: f64,
    pub data_seed: u64,

    pub n_agents: usize,
    pub topology: TopologyKind,
    pub edge_prob: f64,

    pub epsilon: f64,
    pub delta: f64,
    #[serde(alias = "T")]
    pub rounds: usize,
    pub eta: f64,
    pub splits: f64,
    pub beta: f64,
    pub max_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hat: Option<f64>,
    /// `exact` by default so the reported ε never exceeds the target.
    pub rho_conversion: RhoConversion,

    pub c_max: usize,
    pub c_loss: f64,
    pub alpha: f64,
    /// Share of the total ρ spent on the sparse-vector gate.
    pub svt_budget_fraction: f64,

    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Keep solver output that misses the β target instead of failing.
    pub accept_unconverged: bool,
    /// Disables all noise. The privacy report then claims nothing.
    pub insecure_no_noise: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let svt = SvtParams::default();
        Self {
            algorithm: Algorithm::PpAdmm,
            dataset: DatasetKind::Synthetic,
            csv_path: None,
            label_column: "label".into(),
            positive_label: "1".into(),
            samples: 2000,
            features: 5,
            separation: 2.0,
            data_seed: 0,
            n_agents: 5,
            topology: TopologyKind::Random,
            edge_prob: 0.5,
            epsilon: 1.0,
            delta: 1e-4,
            rounds: 30,
            eta: 0.5,
            splits: 0.001,
            beta: solver.beta,
            max_iterations: solver.max_iterations,
            lambda_hat: None,
            rho_conversion: RhoConversion::Exact,
            c_max: svt.c_max,
            c_loss: svt.c_loss,
            alpha: svt.alpha,
            svt_budget_fraction: 0.1,
            seeds: vec![0],
            test_fraction: 0.2,
            output: None,
            accept_unconverged: false,
            insecure_no_noise: false,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::Config(msg)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must be positive and finite")))
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl ExperimentConfig {
    /// Parses a TOML config; missing keys take their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        match self.dataset {
            DatasetKind::Csv if self.csv_path.is_none() => {
                return Err(invalid("dataset = \"csv\" needs csv_path".into()))
            }
            DatasetKind::Synthetic if self.samples < 2 || self.features == 0 => {
                return Err(invalid(format!(
                    "synthetic data needs samples >= 2 and features >= 1 (got {} and {})",
                    self.samples, self.features
                )))
            }
            _ => {}
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(invalid(format!(
                "separation = {} must be finite and >= 0",
                self.separation
            )));
        }
        if self.n_agents == 0 {
            return Err(invalid("n_agents must be at least 1".into()));
        }
        match self.topology {
            TopologyKind::Ring if self.n_agents < 3 && self.n_agents != 1 => {
                return Err(invalid(format!(
                    "a ring needs at least 3 agents (got {})",
                    self.n_agents
                )))
            }
            TopologyKind::Random => check_positive("edge_prob", self.edge_prob).and_then(|_| {
                if self.edge_prob <= 1.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("edge_prob = {} exceeds 1", self.edge_prob)))
                }
            })?,
            _ => {}
        }
        check_positive("epsilon", self.epsilon)?;
        check_open_unit("delta", self.delta)?;
        check_positive("eta", self.eta)?;
        check_open_unit("splits", self.splits)?;
        check_positive("beta", self.beta)?;
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1".into()));
        }
        if let Some(l) = self.lambda_hat {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(invalid(format!("lambda_hat = {l} must be finite and >= 0")));
            }
        }
        if self.algorithm == Algorithm::IppAdmm {
            if self.c_max == 0 {
                return Err(invalid("c_max must be at least 1".into()));
            }
            check_positive("c_loss", self.c_loss)?;
            if self.alpha.is_nan() {
                return Err(invalid("alpha is NaN".into()));
            }
            check_open_unit("svt_budget_fraction", self.svt_budget_fraction)?;
        }
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required".into()));
        }
        check_open_unit("test_fraction", self.test_fraction)?;
        Ok(())
    }

    fn admm_config(&self) -> AdmmConfig {
        AdmmConfig {
            eta: self.eta,
            rounds: self.rounds,
            solver: SolverConfig {
                beta: self.beta,
                max_iterations: self.max_iterations,
                ..SolverConfig::default()
            },
            initial_theta: None,
            accept_unconverged: self.accept_unconverged,
        }
    }

    fn svt_params(&self) -> SvtParams {
        SvtParams {
            alpha: self.alpha,
            c_max: self.c_max,
            c_loss: self.c_loss,
        }
    }

    fn noise_mode(&self) -> NoiseMode {
        if self.insecure_no_noise {
            NoiseMode::Disabled
        } else {
            NoiseMode::Enabled
        }
    }
}

/// Independent sub-seeds for the parts of one seeded run (SplitMix64 finalizer).
fn derive_seed(seed: u64, purpose: u64) -> u64 {
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SPLIT_SEED: u64 = 1;
const PARTITION_SEED: u64 = 2;
const TOPOLOGY_SEED: u64 = 3;
const NOISE_SEED: u64 = 4;

/// Loaded data before the per-seed split. Synthetic data is already
/// preprocessed; CSV data is normalized after splitting, using the training
/// part only.
#[derive(Debug, Clone)]
pub struct SourceData {
    data: Dataset,
    normalized: bool,
}

impl SourceData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        match cfg.dataset {
            DatasetKind::Synthetic => Ok(Self {
                data: synthetic_blobs(cfg.samples, cfg.features, cfg.separation, cfg.data_seed)?,
                normalized: true,
            }),
            DatasetKind::Csv => {
                let path = cfg
                    .csv_path
                    .as_ref()
                    .ok_or_else(|| invalid("dataset = \"csv\" needs csv_path".into()))?;
                Ok(Self {
                    data: load_csv(path, &cfg.label_column, &cfg.positive_label)?,
                    normalized: false,
                })
            }
        }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

/// Everything one seeded run needs.
#[derive(Debug, Clone)]
pub struct SeedSetup {
    pub seed: u64,
    pub parts: Vec<Dataset>,
    pub test: Dataset,
    pub graph: Graph,
    pub plan: Option<BudgetPlan>,
    pub lambda_hat: f64,
}

fn build_graph(cfg: &ExperimentConfig, seed: u64) -> Result<Graph> {
    if cfg.n_agents == 1 {
        return Ok(Graph::singleton());
    }
    match cfg.topology {
        TopologyKind::Ring => Graph::ring(cfg.n_agents),
        TopologyKind::Complete => Graph::complete(cfg.n_agents),
        TopologyKind::Random => Graph::random_connected(cfg.n_agents, cfg.edge_prob, derive_seed(seed, TOPOLOGY_SEED)),
    }
}

/// The budget plan for a private run on the given shard sizes and graph.
pub fn plan_for(cfg: &ExperimentConfig, dataset_sizes: Vec<usize>, degrees: Vec<usize>) -> Result<Option<BudgetPlan>> {
    if cfg.algorithm == Algorithm::Nonprivate {
        return Ok(None);
    }
    let svt_epsilons = match cfg.algorithm {
        Algorithm::IppAdmm => {
            let rho_total = cfg.rho_conversion.rho_total(cfg.epsilon, cfg.delta)?;
            Some(svt_budget(rho_total.rho(), cfg.svt_budget_fraction, cfg.c_max)?)
        }
        _ => None,
    };
    let req = PlanRequest {
        algorithm: cfg.algorithm,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        delta_i1: None,
        rounds: cfg.rounds,
        c_broadcasts: (cfg.algorithm == Algorithm::IppAdmm).then_some(cfg.c_max),
        splits: cfg.splits,
        dataset_sizes,
        eta: cfg.eta,
        degrees,
        beta: cfg.beta,
        c1: LOGISTIC_C1,
        svt_epsilons,
        eps_i3_fraction: EPS_I3_FRACTION,
        lambda_hat: cfg.lambda_hat,
        conversion: cfg.rho_conversion,
    };
    plan_budget(&req).map(Some)
}

impl SeedSetup {
    pub fn new(cfg: &ExperimentConfig, source: &SourceData, seed: u64) -> Result<Self> {
        let (train, test) = train_test_split(&source.data, cfg.test_fraction, derive_seed(seed, SPLIT_SEED))?;
        let (train, test) = if source.normalized {
            (train, test)
        } else {
            let norm = Normalizer::fit(&train);
            (norm.apply(&train)?, norm.apply(&test)?)
        };
        let parts = partition(&train, cfg.n_agents, derive_seed(seed, PARTITION_SEED))?.apply(&train)?;
        let graph = build_graph(cfg, seed)?;
        let plan = plan_for(cfg, parts.iter().map(Dataset::len).collect(), graph.degrees())?;
        let lambda_hat = match &plan {
            Some(plan) => plan.lambda_hat,
            None => cfg.lambda_hat.unwrap_or(DEFAULT_NONPRIVATE_LAMBDA_HAT),
        };
        Ok(Self {
            seed,
            parts,
            test,
            graph,
            plan,
            lambda_hat,
        })
    }
}

/// Privacy actually spent by one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacySummary {
    pub per_agent_rho: Vec<f64>,
    pub total_rho: f64,
    /// `+∞` (written as `"inf"`) when noise was disabled.
    #[serde(serialize_with = "finite_or_inf")]
    pub epsilon: f64,
    pub delta: f64,
    pub noise_disabled: bool,
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub lambda_hat: f64,
    pub edges: Vec<(usize, usize)>,
    pub plan: Option<BudgetPlan>,
    pub trace: Vec<IterationTrace>,
    pub broadcast_counts: Vec<usize>,
    pub privacy: Option<PrivacySummary>,
    pub final_thetas: Vec<Vec<f64>>,
}

impl SeedReport {
    pub fn final_round(&self) -> Option<&IterationTrace> {
        self.trace.last()
    }
}

/// Across-seed mean and (sample) standard deviation for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundAggregate {
    pub round: usize,
    pub mean_loss: f64,
    pub std_loss: f64,
    pub mean_error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    pub aggregate: Vec<RoundAggregate>,
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs one seed on prepared data.
pub fn run_seed(cfg: &ExperimentConfig, setup: &SeedSetup) -> Result<SeedReport> {
    let net = Network::new(&setup.parts, &setup.graph)?.with_test(&setup.test)?;
    let admm = cfg.admm_config();
    let noise_seed = derive_seed(setup.seed, NOISE_SEED);
    let out = match (&setup.plan, cfg.algorithm) {
        (None, _) => run_nonprivate(&net, &admm, setup.lambda_hat)?,
        (Some(plan), Algorithm::PpAdmm) => run_pp_admm(&net, &admm, plan, noise_seed, cfg.noise_mode())?,
        (Some(plan), Algorithm::IppAdmm) => {
            run_ipp_admm(&net, &admm, plan, cfg.svt_params(), noise_seed, cfg.noise_mode())?
        }
        (Some(_), Algorithm::Nonprivate) => unreachable!("non-private runs have no plan"),
    };
    let privacy = out
        .ledger
        .as_ref()
        .map(|ledger| -> Result<PrivacySummary> {
            let report = ledger.report()?;
            Ok(PrivacySummary {
                per_agent_rho: report.per_agent_rho,
                total_rho: report.total_rho,
                epsilon: if cfg.insecure_no_noise {
                    f64::INFINITY
                } else {
                    report.epsilon
                },
                delta: report.delta,
                noise_disabled: cfg.insecure_no_noise,
            })
        })
        .transpose()?;
    Ok(SeedReport {
        seed: setup.seed,
        lambda_hat: setup.lambda_hat,
        edges: setup.graph.edges(),
        plan: setup.plan.clone(),
        trace: out.trace,
        broadcast_counts: out.broadcast_counts,
        privacy,
        final_thetas: out.thetas.iter().map(|t| t.to_vec()).collect(),
    })
}

fn aggregate(seeds: &[SeedReport], rounds: usize) -> Vec<RoundAggregate> {
    (0..rounds)
        .map(|r| {
            let losses: Vec<f64> = seeds.iter().map(|s| s.trace[r].average_loss).collect();
            let errors: Vec<f64> = seeds
                .iter()
                .map(|s| s.trace[r].error_rate_test.unwrap_or(f64::NAN))
                .collect();
            let (mean_loss, std_loss) = mean_std(&losses);
            let (mean_error, std_error) = mean_std(&errors);
            RoundAggregate {
                round: r + 1,
                mean_loss,
                std_loss,
                mean_error,
                std_error,
            }
        })
        .collect()
}

/// Loads data, runs every seed (in parallel), and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let source = SourceData::load(cfg).map_err(|e| e.context("loading data"))?;
    let seeds: Vec<SeedReport> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            SeedSetup::new(cfg, &source, seed)
                .and_then(|setup| run_seed(cfg, &setup))
                .map_err(|e| e.context(format!("seed {seed}")))
        })
        .collect::<Result<_>>()?;
    Ok(RunReport {
        config: cfg.clone(),
        aggregate: aggregate(&seeds, cfg.rounds),
        seeds,
    })
}

/// One line of the NDJSON report.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record<'a> {
    Config {
        config: &'a ExperimentConfig,
    },
    Round {
        seed: u64,
        #[serde(flatten)]
        trace: &'a IterationTrace,
    },
    Seed {
        seed: u64,
        lambda_hat: f64,
        edges: &'a [(usize, usize)],
        plan: &'a Option<BudgetPlan>,
        broadcast_counts: &'a [usize],
        privacy: &'a Option<PrivacySummary>,
        final_thetas: &'a [Vec<f64>],
    },
    Aggregate {
        #[serde(flatten)]
        stats: &'a RoundAggregate,
    },
    Summary {
        algorithm: Algorithm,
        seeds: usize,
        rounds: usize,
        final_mean_loss: Option<f64>,
        final_std_loss: Option<f64>,
        final_mean_error: Option<f64>,
        final_std_error: Option<f64>,
        /// Largest converted ε over seeds; `"inf"` without noise.
        #[serde(serialize_with = "optional_finite_or_inf")]
        epsilon: Option<f64>,
        delta: f64,
        max_broadcasts: Option<usize>,
        noise_disabled: bool,
    },
}

fn optional_finite_or_inf<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => finite_or_inf(v, s),
        None => s.serialize_none(),
    }
}

impl RunReport {
    pub fn records(&self) -> Vec<Record<'_>> {
        let mut out = vec![Record::Config { config: &self.config }];
        for s in &self.seeds {
            out.extend(s.trace.iter().map(|trace| Record::Round { seed: s.seed, trace }));
            out.push(Record::Seed {
                seed: s.seed,
                lambda_hat: s.lambda_hat,
                edges: &s.edges,
                plan: &s.plan,
                broadcast_counts: &s.broadcast_counts,
                privacy: &s.privacy,
                final_thetas: &s.final_thetas,
            });
        }
        out.extend(self.aggregate.iter().map(|stats| Record::Aggregate { stats }));
        let last = self.aggregate.last();
        let epsilon = self
            .seeds
            .iter()
            .filter_map(|s| s.privacy.as_ref().map(|p| p.epsilon))
            .reduce(f64::max);
        out.push(Record::Summary {
            algorithm: self.config.algorithm,
            seeds: self.seeds.len(),
            rounds: self.config.rounds,
            final_mean_loss: last.map(|a| a.mean_loss),
            final_std_loss: last.map(|a| a.std_loss),
            final_mean_error: last.map(|a| a.mean_error),
            final_std_error: last.map(|a| a.std_error),
            epsilon,
            delta: self.config.delta,
            max_broadcasts: self.seeds.iter().flat_map(|s| s.broadcast_counts.iter().copied()).max(),
            noise_disabled: self.config.insecure_no_noise,
        });
        out
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for record in self.records() {
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Final-round mean average loss across seeds.
    pub fn final_mean_loss(&self) -> Option<f64> {
        self.aggregate.last().map(|a| a.mean_loss)
    }

    pub fn final_mean_error(&self) -> Option<f64> {
        self.aggregate.last().map(|a| a.mean_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            samples: 200,
            features: 3,
            rounds: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(
            (c.eta, c.rounds, c.c_max, c.delta, c.splits),
            (0.5, 30, 15, 1e-4, 0.001)
        );
        assert_eq!(
            (c.beta, c.c_loss, c.alpha, c.n_agents),
            (10f64.powf(-3.5), 2.0, 1e-3, 5)
        );
        assert_eq!(c.test_fraction, 0.2);
        c.validate().unwrap();
    }

    #[test]
    fn toml_parsing() {
        let c = ExperimentConfig::from_toml_str("algorithm = \"ipp_admm\"\nT = 12\nseeds = [1, 2]\n").unwrap();
        assert_eq!(c.algorithm, Algorithm::IppAdmm);
        assert_eq!(c.rounds, 12);
        assert_eq!(c.seeds, vec![1, 2]);
        assert!(ExperimentConfig::from_toml_str("no_such_key = 1").is_err());
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn validation_failures() {
        let bad = [
            ExperimentConfig {
                epsilon: 0.0,
                ..small()
            },
            ExperimentConfig { delta: 1.0, ..small() },
            ExperimentConfig {
                seeds: vec![],
                ..small()
            },
            ExperimentConfig {
                test_fraction: 1.0,
                ..small()
            },
            ExperimentConfig {
                n_agents: 2,
                topology: TopologyKind::Ring,
                ..small()
            },
            ExperimentConfig {
                dataset: DatasetKind::Csv,
                ..small()
            },
            ExperimentConfig {
                edge_prob: 1.5,
                ..small()
            },
            ExperimentConfig {
                algorithm: Algorithm::IppAdmm,
                svt_budget_fraction: 1.0,
                ..small()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn mean_std_cases() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (1..=4).map(|p| derive_seed(7, p)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_ne!(derive_seed(7, 1), derive_seed(8, 1));
    }

    #[test]
    fn report_is_reproducible() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap().to_ndjson();
        let b = run_experiment(&cfg).unwrap().to_ndjson();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 1 + 5 + 1 + 5 + 1);
    }
}

//! Synchronous-round simulation of decentralized consensus ADMM: the
//! non-private baseline, PP-ADMM (objective plus output perturbation each
//! round), and IPP-ADMM (broadcasts gated by a sparse-vector test).
//!
//! Within a round every agent reads the same snapshot of the previous
//! round's broadcast values, so agent updates are independent and run in
//! parallel. Results do not depend on scheduling.

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{Algorithm, BudgetPlan, IppEvent, ZcdpLedger};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{average_loss, consensus_residual, error_rate};
use crate::model::{clipped_quality, AugmentedObjective, LocalObjective, ModelVector};
use crate::noise::{gaussian_vector, NoiseMode, RngHandle, StreamPurpose};
use crate::solver::{descend, minimize, SolverConfig};
use crate::svt::{SvtDecision, SvtGate};
use crate::topology::Graph;

/// Agents, their private data, the links between them, and an optional
/// held-out set for error rates.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a> {
    parts: &'a [Dataset],
    graph: &'a Graph,
    test: Option<&'a Dataset>,
}

impl<'a> Network<'a> {
    pub fn new(parts: &'a [Dataset], graph: &'a Graph) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("network has no agents".into()));
        }
        if parts.len() != graph.n() {
            return Err(Error::InvalidParameter(format!(
                "{} datasets for a graph of {} agents",
                parts.len(),
                graph.n()
            )));
        }
        let d = parts[0].dimension();
        if let Some(p) = parts.iter().find(|p| p.dimension() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.dimension(),
            });
        }
        Ok(Self {
            parts,
            graph,
            test: None,
        })
    }

    pub fn with_test(mut self, test: &'a Dataset) -> Result<Self> {
        if test.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: test.dimension(),
            });
        }
        self.test = Some(test);
        Ok(self)
    }

    pub fn n_agents(&self) -> usize {
        self.parts.len()
    }

    pub fn dimension(&self) -> usize {
        self.parts[0].dimension()
    }

    pub fn parts(&self) -> &'a [Dataset] {
        self.parts
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn dataset_sizes(&self) -> Vec<usize> {
        self.parts.iter().map(Dataset::len).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Penalty / step size η.
    pub eta: f64,
    pub rounds: usize,
    pub solver: SolverConfig,
    /// Shared starting point; zero when absent.
    pub initial_theta: Option<Vec<f64>>,
    /// Keep the last iterate when a local solve misses β instead of failing.
    pub accept_unconverged: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            rounds: 30,
            solver: SolverConfig::default(),
            initial_theta: None,
            accept_unconverged: false,
        }
    }
}

/// Sparse-vector gate settings for IPP-ADMM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvtParams {
    pub alpha: f64,
    pub c_max: usize,
    pub c_loss: f64,
}

impl Default for SvtParams {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            c_max: 15,
            c_loss: 2.0,
        }
    }
}

/// Metrics after one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub round: usize,
    pub average_loss: f64,
    pub error_rate_test: Option<f64>,
    pub consensus_residual: f64,
    pub broadcasts: Vec<bool>,
    pub cumulative_rho: Vec<f64>,
    pub unconverged_solves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<IterationTrace>,
    pub thetas: Vec<ModelVector>,
    pub duals: Vec<ModelVector>,
    pub ledger: Option<ZcdpLedger>,
    pub broadcast_counts: Vec<usize>,
}

/// `λ + (η/2) Σ_j (θ_i − θ_j)`.
pub fn dual_update(
    dual: &ModelVector,
    theta: &ModelVector,
    neighbor_thetas: &[&ModelVector],
    eta: f64,
) -> Result<ModelVector> {
    let d = dual.len();
    for v in std::iter::once(&theta).chain(neighbor_thetas) {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: v.len(),
            });
        }
    }
    let disagreement = neighbor_thetas
        .iter()
        .fold(Array1::zeros(d), |acc, nb| acc + (theta - *nb));
    Ok(dual + &(0.5 * eta * disagreement))
}

/// Minimizes the pooled objective `mean L + (λ̂/N)·½‖θ‖²` from zero.
pub fn centralized_reference(
    pooled: &Dataset,
    lambda_hat: f64,
    n_agents: usize,
    cfg: &SolverConfig,
) -> Result<ModelVector> {
    let objective = LocalObjective::new(pooled, lambda_hat, n_agents)?;
    Ok(minimize(&objective, Array1::zeros(pooled.dimension()), cfg)?.theta)
}

#[derive(Clone, Copy)]
enum Privacy<'p> {
    Off,
    Pp(&'p BudgetPlan),
    Ipp(&'p BudgetPlan, SvtParams),
}

struct AgentState {
    theta: ModelVector,
    dual: ModelVector,
    objective_rng: Option<RngHandle>,
    output_rng: Option<RngHandle>,
    query_rng: Option<RngHandle>,
    gate: Option<SvtGate>,
    broadcasts: usize,
}

struct StepOutcome {
    theta: ModelVector,
    broadcast: bool,
    converged: bool,
}

fn validate(net: &Network<'_>, cfg: &AdmmConfig) -> Result<ModelVector> {
    if !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta {} must be positive", cfg.eta)));
    }
    cfg.solver.validate()?;
    let d = net.dimension();
    match &cfg.initial_theta {
        None => Ok(Array1::zeros(d)),
        Some(v) if v.len() == d && v.iter().all(|x| x.is_finite()) => Ok(Array1::from(v.clone())),
        Some(v) => Err(Error::InvalidParameter(format!(
            "initial theta has {} entries (need {d}, all finite)",
            v.len()
        ))),
    }
}

fn check_plan(net: &Network<'_>, cfg: &AdmmConfig, plan: &BudgetPlan, algorithm: Algorithm) -> Result<()> {
    let mismatch = |what: &str| {
        Err(Error::InvalidParameter(format!(
            "budget plan does not match the run: {what}"
        )))
    };
    if plan.algorithm != algorithm {
        return mismatch("algorithm");
    }
    if plan.n_agents != net.n_agents() {
        return mismatch("agent count");
    }
    if plan.dataset_sizes != net.dataset_sizes() {
        return mismatch("dataset sizes");
    }
    if plan.degrees != net.graph.degrees() {
        return mismatch("graph degrees");
    }
    if plan.eta != cfg.eta {
        return mismatch("eta");
    }
    if plan.beta != cfg.solver.beta {
        return mismatch("beta");
    }
    if plan.rounds != cfg.rounds {
        return mismatch("round count");
    }
    if plan.lambda_hat < plan.lambda_hat_floor {
        return mismatch("lambda_hat below floor");
    }
    Ok(())
}

/// Non-private decentralized ADMM.
pub fn run_nonprivate(net: &Network<'_>, cfg: &AdmmConfig, lambda_hat: f64) -> Result<RunOutput> {
    run(net, cfg, lambda_hat, Privacy::Off, 0, NoiseMode::Disabled)
}

/// PP-ADMM: every agent perturbs its objective, solves to β, perturbs the
/// solution, and broadcasts, every round.
pub fn run_pp_admm(
    net: &Network<'_>,
    cfg: &AdmmConfig,
    plan: &BudgetPlan,
    seed: u64,
    noise: NoiseMode,
) -> Result<RunOutput> {
    check_plan(net, cfg, plan, Algorithm::PpAdmm)?;
    run(net, cfg, plan.lambda_hat, Privacy::Pp(plan), seed, noise)
}

/// IPP-ADMM: as PP-ADMM, but a sparse-vector gate decides whether the new
/// solution is broadcast; neighbors reuse stale values otherwise.
pub fn run_ipp_admm(
    net: &Network<'_>,
    cfg: &AdmmConfig,
    plan: &BudgetPlan,
    svt: SvtParams,
    seed: u64,
    noise: NoiseMode,
) -> Result<RunOutput> {
    check_plan(net, cfg, plan, Algorithm::IppAdmm)?;
    if svt.c_max != plan.releases {
        return Err(Error::InvalidParameter(format!(
            "gate cap {} differs from the planned broadcast count {}",
            svt.c_max, plan.releases
        )));
    }
    if plan.svt_epsilons.is_none() {
        return Err(Error::InvalidParameter("plan has no SVT budget".into()));
    }
    run(net, cfg, plan.lambda_hat, Privacy::Ipp(plan, svt), seed, noise)
}

fn run(
    net: &Network<'_>,
    cfg: &AdmmConfig,
    lambda_hat: f64,
    privacy: Privacy<'_>,
    seed: u64,
    noise: NoiseMode,
) -> Result<RunOutput> {
    let theta0 = validate(net, cfg)?;
    let n = net.n_agents();
    let d = net.dimension();
    let neighbor_lists: Vec<Vec<usize>> = (0..n)
        .map(|i| net.graph.neighbors(i).map(|s| s.iter().copied().collect()))
        .collect::<Result<_>>()?;

    let mut ledger = match privacy {
        Privacy::Off => None,
        Privacy::Pp(plan) | Privacy::Ipp(plan, _) => Some(ZcdpLedger::new(n, plan.delta_total)?),
    };
    let private = !matches!(privacy, Privacy::Off);
    let stream = |i, purpose| private.then(|| RngHandle::for_agent(seed, i, purpose, noise));

    let mut agents: Vec<AgentState> = Vec::with_capacity(n);
    for i in 0..n {
        let gate = match privacy {
            Privacy::Ipp(plan, svt) => {
                let (eps1, eps2) = plan.svt_epsilons.expect("checked by run_ipp_admm");
                let mut threshold_rng = RngHandle::for_agent(seed, i, StreamPurpose::SvtThreshold, noise);
                let gate = SvtGate::new(svt.alpha, svt.c_max, eps1, eps2, svt.c_loss, &mut threshold_rng)?;
                if let Some(ledger) = ledger.as_mut() {
                    ledger.charge_ipp(i, plan, IppEvent::SvtOpen)?;
                }
                Some(gate)
            }
            _ => None,
        };
        agents.push(AgentState {
            theta: theta0.clone(),
            dual: Array1::zeros(d),
            objective_rng: stream(i, StreamPurpose::ObjectiveNoise),
            output_rng: stream(i, StreamPurpose::OutputNoise),
            query_rng: stream(i, StreamPurpose::SvtQuery),
            gate,
            broadcasts: 0,
        });
    }

    let mut trace = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let snapshot: Vec<ModelVector> = agents.iter().map(|a| a.theta.clone()).collect();
        let outcomes: Vec<StepOutcome> = agents
            .par_iter_mut()
            .enumerate()
            .map(|(i, agent)| {
                agent_step(i, agent, &snapshot, &neighbor_lists[i], net, cfg, lambda_hat, privacy)
                    .map_err(|e| e.at(round, i))
            })
            .collect::<Result<_>>()?;

        let mut unconverged = 0;
        for (i, (agent, outcome)) in agents.iter_mut().zip(&outcomes).enumerate() {
            agent.theta = outcome.theta.clone();
            unconverged += usize::from(!outcome.converged);
            if outcome.broadcast {
                agent.broadcasts += 1;
            }
            match (privacy, ledger.as_mut()) {
                (Privacy::Pp(plan), Some(ledger)) => ledger.charge_pp_iteration(i, plan)?,
                (Privacy::Ipp(plan, _), Some(ledger)) if outcome.broadcast => {
                    ledger.charge_ipp(i, plan, IppEvent::Broadcast)?
                }
                _ => {}
            }
        }

        // Everyone now holds the latest value each neighbor broadcast.
        let current: Vec<ModelVector> = agents.iter().map(|a| a.theta.clone()).collect();
        for (i, agent) in agents.iter_mut().enumerate() {
            let nbs: Vec<&ModelVector> = neighbor_lists[i].iter().map(|&j| &current[j]).collect();
            agent.dual = dual_update(&agent.dual, &current[i], &nbs, cfg.eta)?;
        }

        trace.push(IterationTrace {
            round,
            average_loss: average_loss(&current, net.parts)?,
            error_rate_test: net.test.map(|t| error_rate(&current, t)).transpose()?,
            consensus_residual: consensus_residual(&current),
            broadcasts: outcomes.iter().map(|o| o.broadcast).collect(),
            cumulative_rho: match &ledger {
                Some(l) => l.per_agent().iter().map(|c| c.rho()).collect(),
                None => vec![0.0; n],
            },
            unconverged_solves: unconverged,
        });
    }

    Ok(RunOutput {
        trace,
        broadcast_counts: agents.iter().map(|a| a.broadcasts).collect(),
        thetas: agents.iter().map(|a| a.theta.clone()).collect(),
        duals: agents.into_iter().map(|a| a.dual).collect(),
        ledger,
    })
}

#[allow(clippy::too_many_arguments)]
fn agent_step(
    i: usize,
    agent: &mut AgentState,
    snapshot: &[ModelVector],
    neighbors: &[usize],
    net: &Network<'_>,
    cfg: &AdmmConfig,
    lambda_hat: f64,
    privacy: Privacy<'_>,
) -> Result<StepOutcome> {
    let current = &snapshot[i];
    if agent.gate.as_ref().is_some_and(SvtGate::is_exhausted) {
        // θ̂ would be discarded anyway
        return Ok(StepOutcome {
            theta: current.clone(),
            broadcast: false,
            converged: true,
        });
    }
    let d = current.len();
    let plan = match privacy {
        Privacy::Off => None,
        Privacy::Pp(plan) | Privacy::Ipp(plan, _) => Some(plan),
    };

    let b1 = match (plan, agent.objective_rng.as_mut()) {
        (Some(plan), Some(rng)) => Some(gaussian_vector(plan.sigma_i1[i], d, rng)?),
        _ => None,
    };
    let local = LocalObjective::new(&net.parts[i], lambda_hat, net.n_agents())?;
    let nbs: Vec<&ModelVector> = neighbors.iter().map(|&j| &snapshot[j]).collect();
    let objective = AugmentedObjective::new(local, &agent.dual, current, &nbs, cfg.eta, b1.as_ref())?;
    let descent = descend(&objective, current.clone(), &cfg.solver)?;
    let converged = descent.converged;
    let theta_hat = if cfg.accept_unconverged {
        descent.theta
    } else {
        descent.into_result(cfg.solver.beta)?.theta
    };

    let mut perturb = |theta_hat: ModelVector| -> Result<ModelVector> {
        match (plan, agent.output_rng.as_mut()) {
            (Some(plan), Some(rng)) => Ok(theta_hat + gaussian_vector(plan.sigma_i2[i], d, rng)?),
            _ => Ok(theta_hat),
        }
    };

    let (theta, broadcast) = match privacy {
        Privacy::Off | Privacy::Pp(_) => (perturb(theta_hat)?, true),
        Privacy::Ipp(_, svt) => {
            let quality = clipped_quality(current, &theta_hat, &local, svt.c_loss)?;
            let gate = agent.gate.as_mut().expect("IPP agents own a gate");
            let rng = agent.query_rng.as_mut().expect("IPP agents own a query stream");
            match gate.check(quality, rng)? {
                SvtDecision::Above => (perturb(theta_hat)?, true),
                SvtDecision::Below | SvtDecision::Exhausted => (current.clone(), false),
            }
        }
    };
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite model after update".into()));
    }
    Ok(StepOutcome {
        theta,
        broadcast,
        converged,
    })
}

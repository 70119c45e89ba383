//! zCDP bookkeeping: mechanism costs, composition, DP conversions, the
//! budget planner that derives every noise scale and the regularizer floor,
//! and a per-agent ledger.

use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svt::svt_rho;

/// A ρ-zCDP cost.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZcdpCost(f64);

impl ZcdpCost {
    pub const ZERO: ZcdpCost = ZcdpCost(0.0);

    pub fn new(rho: f64) -> Result<Self> {
        if rho >= 0.0 && rho.is_finite() {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidParameter(format!("rho {rho} must be finite and >= 0")))
        }
    }

    pub fn rho(self) -> f64 {
        self.0
    }
}

impl Add for ZcdpCost {
    type Output = ZcdpCost;

    fn add(self, rhs: Self) -> Self {
        ZcdpCost(self.0 + rhs.0)
    }
}

impl Sum for ZcdpCost {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ZcdpCost::ZERO, Add::add)
    }
}

/// Gaussian mechanism with L2 sensitivity `Δ` and noise `σ` is `Δ²/(2σ²)`-zCDP.
pub fn gaussian_zcdp(delta2_sensitivity: f64, sigma: f64) -> Result<ZcdpCost> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    ZcdpCost::new(delta2_sensitivity * delta2_sensitivity / (2.0 * sigma * sigma))
}

fn check_delta(delta: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        (0.0..1.0).contains(&delta)
    } else {
        delta > 0.0 && delta < 1.0
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta {delta} out of range")))
    }
}

/// `(ε, δ)`-DP target to a sufficient ρ: `ε²/(4 ln(1/δ))`, or `ε²/2` for
/// `δ = 0` (pure DP).
pub fn dp_to_zcdp(epsilon: f64, delta: f64) -> Result<ZcdpCost> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    check_delta(delta, true)?;
    if delta == 0.0 {
        ZcdpCost::new(0.5 * epsilon * epsilon)
    } else {
        ZcdpCost::new(epsilon * epsilon / (4.0 * (1.0 / delta).ln()))
    }
}

/// ρ-zCDP implies `(ρ + 2√(ρ ln(1/δ)), δ)`-DP.
pub fn zcdp_to_dp(rho: ZcdpCost, delta: f64) -> Result<f64> {
    check_delta(delta, false)?;
    let r = rho.rho();
    Ok(r + 2.0 * (r * (1.0 / delta).ln()).sqrt())
}

/// Largest ρ whose [`zcdp_to_dp`] conversion is exactly `epsilon`.
pub fn zcdp_for_dp_exact(epsilon: f64, delta: f64) -> Result<ZcdpCost> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    check_delta(delta, false)?;
    // ρ + 2√(ρL) = ε  ⇒  √ρ = √(L+ε) − √L = ε / (√(L+ε) + √L)
    let l = (1.0 / delta).ln();
    let root = epsilon / ((l + epsilon).sqrt() + l.sqrt());
    ZcdpCost::new(root * root)
}

/// Mechanisms on the same data: costs add.
pub fn serial_compose(costs: &[ZcdpCost]) -> ZcdpCost {
    costs.iter().copied().sum()
}

/// Mechanisms on disjoint data: the maximum cost.
pub fn parallel_compose(costs: &[ZcdpCost]) -> Result<ZcdpCost> {
    costs
        .iter()
        .copied()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .ok_or_else(|| Error::InvalidParameter("parallel composition of nothing".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nonprivate,
    PpAdmm,
    IppAdmm,
}

/// How the overall `(ε, δ)` target becomes a total ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoConversion {
    /// `ρ = ε²/(4 ln(1/δ))`.
    #[default]
    Sufficient,
    /// Largest ρ with `ρ + 2√(ρ ln(1/δ)) = ε`, so the ledger converts back
    /// to exactly ε.
    Exact,
}

impl RhoConversion {
    /// Total ρ for an `(ε, δ)` target under this conversion.
    pub fn rho_total(self, epsilon: f64, delta: f64) -> Result<ZcdpCost> {
        match self {
            RhoConversion::Sufficient => dp_to_zcdp(epsilon, delta),
            RhoConversion::Exact => zcdp_for_dp_exact(epsilon, delta),
        }
    }
}

/// Inputs to [`plan_budget`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub delta: f64,
    /// δ used for the objective-perturbation step; defaults to `delta`.
    pub delta_i1: Option<f64>,
    pub rounds: usize,
    /// Maximum broadcasts per agent (IPP-ADMM only).
    pub c_broadcasts: Option<usize>,
    /// Fraction of each per-broadcast budget given to output perturbation.
    pub splits: f64,
    pub dataset_sizes: Vec<usize>,
    pub eta: f64,
    pub degrees: Vec<usize>,
    pub beta: f64,
    /// Curvature bound of the loss.
    pub c1: f64,
    /// `(ε₁, ε₂)` for the sparse-vector gate (IPP-ADMM only).
    pub svt_epsilons: Option<(f64, f64)>,
    /// `ε_i3 = eps_i3_fraction · ε_i1`.
    pub eps_i3_fraction: f64,
    /// Regularizer to use; must be at least the floor. Defaults to the floor.
    pub lambda_hat: Option<f64>,
    pub conversion: RhoConversion,
}

impl PlanRequest {
    /// The experiment defaults for `n` agents of equal size and degree.
    pub fn uniform(algorithm: Algorithm, epsilon: f64, dataset_size: usize, n: usize, degree: usize) -> Self {
        let c = 15;
        Self {
            algorithm,
            epsilon,
            delta: 1e-4,
            delta_i1: None,
            rounds: 30,
            c_broadcasts: (algorithm == Algorithm::IppAdmm).then_some(c),
            splits: 0.001,
            dataset_sizes: vec![dataset_size; n],
            eta: 0.5,
            degrees: vec![degree; n],
            beta: 10f64.powf(-3.5),
            c1: crate::model::LOGISTIC_C1,
            svt_epsilons: None,
            eps_i3_fraction: 0.99,
            lambda_hat: None,
            conversion: RhoConversion::Sufficient,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.dataset_sizes.len()
    }
}

/// Every privacy parameter of a run, derived from the `(ε, δ)` target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub algorithm: Algorithm,
    pub epsilon_total: f64,
    pub delta_total: f64,
    pub rounds: usize,
    /// Number of charged releases per agent: `T` for PP-ADMM, `c` for IPP-ADMM.
    pub releases: usize,
    pub splits: f64,
    pub rho_total: ZcdpCost,
    /// One-off cost of the sparse-vector gate (zero for PP-ADMM).
    pub rho_svt: ZcdpCost,
    pub svt_epsilons: Option<(f64, f64)>,
    pub rho_i1: ZcdpCost,
    pub rho_i2: ZcdpCost,
    pub epsilon_i1: f64,
    pub epsilon_i3: f64,
    pub delta_i1: f64,
    pub sigma_i1: Vec<f64>,
    pub sigma_i2: Vec<f64>,
    pub lambda_hat_floor: f64,
    pub lambda_hat: f64,
    pub n_agents: usize,
    pub eta: f64,
    pub beta: f64,
    pub dataset_sizes: Vec<usize>,
    pub degrees: Vec<usize>,
}

impl BudgetPlan {
    /// Cost of one release (objective plus output perturbation).
    pub fn per_release(&self) -> ZcdpCost {
        self.rho_i1 + self.rho_i2
    }

    /// Per-agent cost after the maximum number of releases.
    pub fn max_agent_cost(&self) -> ZcdpCost {
        let releases: Vec<ZcdpCost> = std::iter::repeat_n(self.per_release(), self.releases).collect();
        self.rho_svt + serial_compose(&releases)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

/// Derives per-round budgets, noise scales, and the regularizer floor.
pub fn plan_budget(req: &PlanRequest) -> Result<BudgetPlan> {
    positive("epsilon", req.epsilon)?;
    check_delta(req.delta, false)?;
    let delta_i1 = req.delta_i1.unwrap_or(req.delta);
    check_delta(delta_i1, false)?;
    positive("eta", req.eta)?;
    positive("beta", req.beta)?;
    positive("c1", req.c1)?;
    if req.rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be positive".into()));
    }
    if !(req.splits > 0.0 && req.splits < 1.0) {
        return Err(Error::InvalidParameter(format!("splits {} not in (0, 1)", req.splits)));
    }
    if !(req.eps_i3_fraction > 0.0 && req.eps_i3_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps_i3_fraction {} not in (0, 1)",
            req.eps_i3_fraction
        )));
    }
    let n = req.n_agents();
    if n == 0 || req.degrees.len() != n {
        return Err(Error::InvalidParameter(format!(
            "need one dataset size and degree per agent (got {} and {})",
            n,
            req.degrees.len()
        )));
    }
    if req.dataset_sizes.contains(&0) {
        return Err(Error::InvalidParameter("every agent needs data".into()));
    }

    let rho_total = req.conversion.rho_total(req.epsilon, req.delta)?;

    let (releases, rho_svt, svt_epsilons) = match req.algorithm {
        Algorithm::PpAdmm | Algorithm::Nonprivate => (req.rounds, ZcdpCost::ZERO, None),
        Algorithm::IppAdmm => {
            let c = req
                .c_broadcasts
                .ok_or_else(|| Error::InvalidParameter("IPP-ADMM requires a broadcast cap c".into()))?;
            if c == 0 {
                return Err(Error::InvalidParameter("broadcast cap c must be at least 1".into()));
            }
            let (e1, e2) = req
                .svt_epsilons
                .ok_or_else(|| Error::InvalidParameter("IPP-ADMM requires (eps1, eps2)".into()))?;
            positive("eps1", e1)?;
            positive("eps2", e2)?;
            let rho_svt = ZcdpCost::new(svt_rho(e1, e2))?;
            if rho_svt.rho() >= rho_total.rho() {
                return Err(Error::SvtExceedsBudget {
                    svt_rho: rho_svt.rho(),
                    rho_total: rho_total.rho(),
                });
            }
            (c, rho_svt, Some((e1, e2)))
        }
    };

    let per_round = (rho_total.rho() - rho_svt.rho()) / releases as f64;
    let rho_i2 = ZcdpCost::new(per_round * req.splits)?;
    let rho_i1 = ZcdpCost::new(per_round * (1.0 - req.splits))?;
    let epsilon_i1 = zcdp_to_dp(rho_i1, delta_i1)?;
    let epsilon_i3 = req.eps_i3_fraction * epsilon_i1;

    let gap = epsilon_i1 - epsilon_i3;
    let lambda_hat_floor = req
        .dataset_sizes
        .iter()
        .map(|&size| 2.8 * n as f64 * req.c1 / (gap * size as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let lambda_hat = match req.lambda_hat {
        None => lambda_hat_floor,
        Some(l) if l >= lambda_hat_floor => l,
        Some(l) => {
            return Err(Error::InvalidParameter(format!(
                "lambda_hat {l} is below the floor {lambda_hat_floor}"
            )))
        }
    };

    let gauss = 2.0 * (2.0 * (1.25 / delta_i1).ln()).sqrt();
    let sigma_i1 = req
        .dataset_sizes
        .iter()
        .map(|&size| gauss / (size as f64 * epsilon_i3))
        .collect();
    let out_scale = (2.0 * rho_i2.rho()).sqrt();
    let sigma_i2 = req
        .degrees
        .iter()
        .map(|&deg| req.beta / (out_scale * (lambda_hat / n as f64 + 2.0 * req.eta * deg as f64)))
        .collect();

    Ok(BudgetPlan {
        algorithm: req.algorithm,
        epsilon_total: req.epsilon,
        delta_total: req.delta,
        rounds: req.rounds,
        releases,
        splits: req.splits,
        rho_total,
        rho_svt,
        svt_epsilons,
        rho_i1,
        rho_i2,
        epsilon_i1,
        epsilon_i3,
        delta_i1,
        sigma_i1,
        sigma_i2,
        lambda_hat_floor,
        lambda_hat,
        n_agents: n,
        eta: req.eta,
        beta: req.beta,
        dataset_sizes: req.dataset_sizes.clone(),
        degrees: req.degrees.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IppEvent {
    SvtOpen,
    Broadcast,
}

/// Accumulated per-agent zCDP cost of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZcdpLedger {
    per_agent: Vec<ZcdpCost>,
    svt_opened: Vec<bool>,
    delta_target: f64,
}

/// Exported summary of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub per_agent_rho: Vec<f64>,
    pub total_rho: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl ZcdpLedger {
    pub fn new(n_agents: usize, delta_target: f64) -> Result<Self> {
        check_delta(delta_target, false)?;
        Ok(Self {
            per_agent: vec![ZcdpCost::ZERO; n_agents],
            svt_opened: vec![false; n_agents],
            delta_target,
        })
    }

    pub fn per_agent(&self) -> &[ZcdpCost] {
        &self.per_agent
    }

    pub fn agent(&self, agent: usize) -> Result<ZcdpCost> {
        self.per_agent.get(agent).copied().ok_or(Error::AgentOutOfRange(agent))
    }

    pub fn delta_target(&self) -> f64 {
        self.delta_target
    }

    fn charge(&mut self, agent: usize, cost: ZcdpCost) -> Result<()> {
        let slot = self.per_agent.get_mut(agent).ok_or(Error::AgentOutOfRange(agent))?;
        *slot = *slot + cost;
        Ok(())
    }

    /// One PP-ADMM round for `agent`: `ρ_i1 + ρ_i2`.
    pub fn charge_pp_iteration(&mut self, agent: usize, plan: &BudgetPlan) -> Result<()> {
        self.charge(agent, plan.per_release())
    }

    /// Gate creation costs `(ε₁+ε₂)²/2` once; each broadcast `ρ_i1 + ρ_i2`.
    pub fn charge_ipp(&mut self, agent: usize, plan: &BudgetPlan, event: IppEvent) -> Result<()> {
        match event {
            IppEvent::SvtOpen => {
                let opened = self.svt_opened.get_mut(agent).ok_or(Error::AgentOutOfRange(agent))?;
                if *opened {
                    return Err(Error::SvtAlreadyOpened(agent));
                }
                *opened = true;
                self.charge(agent, plan.rho_svt)
            }
            IppEvent::Broadcast => self.charge(agent, plan.per_release()),
        }
    }

    /// Parallel composition across agents (their datasets are disjoint).
    pub fn total(&self) -> Result<ZcdpCost> {
        parallel_compose(&self.per_agent)
    }

    pub fn epsilon(&self) -> Result<f64> {
        zcdp_to_dp(self.total()?, self.delta_target)
    }

    pub fn report(&self) -> Result<PrivacyReport> {
        Ok(PrivacyReport {
            per_agent_rho: self.per_agent.iter().map(|c| c.rho()).collect(),
            total_rho: self.total()?.rho(),
            epsilon: self.epsilon()?,
            delta: self.delta_target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cost(v: f64) -> ZcdpCost {
        ZcdpCost::new(v).unwrap()
    }

    #[test]
    fn gaussian_costs() {
        assert_eq!(gaussian_zcdp(1.0, 1.0).unwrap().rho(), 0.5);
        assert_eq!(gaussian_zcdp(2.0, 1.0).unwrap().rho(), 2.0);
        assert_relative_eq!(gaussian_zcdp(1.0, 10.0).unwrap().rho(), 0.005, max_relative = 1e-15);
        assert!(gaussian_zcdp(1.0, 0.0).is_err());
    }

    #[test]
    fn dp_zcdp_conversions() {
        // 1/(4 ln 10⁴) = 0.0271434051
        assert_relative_eq!(dp_to_zcdp(1.0, 1e-4).unwrap().rho(), 0.0271434051, max_relative = 1e-9);
        assert_eq!(dp_to_zcdp(1.0, 0.0).unwrap().rho(), 0.5);
        assert_relative_eq!(dp_to_zcdp(2.0, 1e-4).unwrap().rho(), 0.108574, max_relative = 1e-5);
        assert_eq!(zcdp_to_dp(ZcdpCost::ZERO, 0.3).unwrap(), 0.0);
        // 2√(ρ ln 10⁴) = 1 exactly here, so the result is 1 + ρ
        let rho = dp_to_zcdp(1.0, 1e-4).unwrap();
        assert_relative_eq!(zcdp_to_dp(rho, 1e-4).unwrap(), 1.02714341, max_relative = 1e-8);
        assert!(zcdp_to_dp(rho, 0.0).is_err());
    }

    #[test]
    fn exact_inverse_round_trips() {
        for eps in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let rho = zcdp_for_dp_exact(eps, 1e-4).unwrap();
            assert_relative_eq!(zcdp_to_dp(rho, 1e-4).unwrap(), eps, max_relative = 1e-13);
            assert!(rho.rho() < dp_to_zcdp(eps, 1e-4).unwrap().rho());
        }
    }

    #[test]
    fn compositions() {
        assert_relative_eq!(serial_compose(&[cost(0.1), cost(0.2)]).rho(), 0.3, max_relative = 1e-15);
        assert_eq!(serial_compose(&[]), ZcdpCost::ZERO);
        assert_relative_eq!(serial_compose(&vec![cost(0.01); 30]).rho(), 0.3, max_relative = 1e-14);
        assert_eq!(parallel_compose(&[cost(0.1), cost(0.2)]).unwrap().rho(), 0.2);
        assert_eq!(parallel_compose(&[cost(0.4); 3]).unwrap().rho(), 0.4);
        assert_eq!(parallel_compose(&[cost(0.7)]).unwrap().rho(), 0.7);
        assert!(parallel_compose(&[]).is_err());
    }

    fn paper_request() -> PlanRequest {
        PlanRequest::uniform(Algorithm::PpAdmm, 1.0, 7000, 5, 2)
    }

    #[test]
    fn plan_matches_hand_calculation() {
        let plan = plan_budget(&paper_request()).unwrap();
        // Independent closed forms, evaluated step by step.
        let l = (1e4f64).ln();
        let rho_total = 1.0 / (4.0 * l);
        let per_round = rho_total / 30.0;
        let rho_i2 = per_round * 0.001;
        let rho_i1 = per_round * 0.999;
        let eps_i1 = rho_i1 + 2.0 * (rho_i1 * l).sqrt();
        let eps_i3 = 0.99 * eps_i1;
        let lam = 2.8 * 5.0 * 0.25 / ((eps_i1 - eps_i3) * 7000.0);
        let s1 = 2.0 * (2.0 * (1.25e4f64).ln()).sqrt() / (7000.0 * eps_i3);
        let s2 = 10f64.powf(-3.5) / ((2.0 * rho_i2).sqrt() * (lam / 5.0 + 2.0 * 0.5 * 2.0));
        assert_relative_eq!(plan.rho_total.rho(), rho_total, max_relative = 1e-14);
        assert_relative_eq!(plan.rho_i1.rho(), rho_i1, max_relative = 1e-14);
        assert_relative_eq!(plan.rho_i2.rho(), rho_i2, max_relative = 1e-14);
        assert_relative_eq!(plan.epsilon_i1, eps_i1, max_relative = 1e-14);
        assert_relative_eq!(plan.lambda_hat_floor, lam, max_relative = 1e-12);
        assert_relative_eq!(plan.sigma_i1[0], s1, max_relative = 1e-12);
        assert_relative_eq!(plan.sigma_i2[0], s2, max_relative = 1e-12);
        // Rounded reference values
        assert_relative_eq!(per_round, 9.0478e-4, max_relative = 1e-4);
        assert_relative_eq!(eps_i1, 0.18339, max_relative = 1e-4);
        assert_relative_eq!(eps_i3, 0.18156, max_relative = 1e-4);
        assert_relative_eq!(lam, 0.2727, max_relative = 1e-3);
        assert_relative_eq!(s1, 0.006836, max_relative = 1e-3);
        assert_relative_eq!(s2, 0.11442, max_relative = 1e-4);
        assert!(plan.epsilon_i3 < plan.epsilon_i1);
    }

    #[test]
    fn line_nine_identity() {
        let plan = plan_budget(&paper_request()).unwrap();
        let k = plan.lambda_hat / 5.0 + 2.0 * 0.5 * 2.0;
        let lhs = plan.sigma_i2[0] * (2.0 * plan.rho_i2.rho()).sqrt() * k;
        assert!((lhs - plan.beta).abs() < 1e-12);
        // equivalently, the Gaussian mechanism with sensitivity β/k costs ρ_i2
        let rho = gaussian_zcdp(plan.beta / k, plan.sigma_i2[0]).unwrap();
        assert!((rho.rho() - plan.rho_i2.rho()).abs() < 1e-12);
    }

    #[test]
    fn plan_scaling_properties() {
        let mut req = paper_request();
        let base = plan_budget(&req).unwrap();
        req.dataset_sizes = vec![14000; 5];
        let doubled = plan_budget(&req).unwrap();
        assert_relative_eq!(doubled.sigma_i1[0], base.sigma_i1[0] / 2.0, max_relative = 1e-14);

        let mut req = paper_request();
        let mut prev = 0.0;
        for splits in [1e-1, 1e-3, 1e-6, 1e-9] {
            req.splits = splits;
            let s = plan_budget(&req).unwrap().sigma_i2[0];
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn plan_heterogeneous_takes_max_floor() {
        let mut req = paper_request();
        req.dataset_sizes = vec![7000, 7000, 3500, 7000, 7000];
        req.degrees = vec![1, 2, 3, 4, 2];
        let plan = plan_budget(&req).unwrap();
        let gap = plan.epsilon_i1 - plan.epsilon_i3;
        assert_relative_eq!(
            plan.lambda_hat_floor,
            2.8 * 5.0 * 0.25 / (gap * 3500.0),
            max_relative = 1e-12
        );
        assert!(plan.sigma_i2[0] > plan.sigma_i2[3]);
        assert!(plan.sigma_i1[2] > plan.sigma_i1[0]);
    }

    #[test]
    fn plan_rejects_bad_requests() {
        let mut req = PlanRequest::uniform(Algorithm::IppAdmm, 1.0, 7000, 5, 2);
        assert!(plan_budget(&req).is_err(), "missing svt epsilons");
        req.svt_epsilons = Some((0.5, 0.5));
        assert!(matches!(plan_budget(&req), Err(Error::SvtExceedsBudget { .. })));
        req.c_broadcasts = None;
        req.svt_epsilons = Some((0.01, 0.01));
        assert!(plan_budget(&req).is_err());

        let mut req = paper_request();
        req.lambda_hat = Some(0.1);
        assert!(plan_budget(&req).is_err());
        req.lambda_hat = Some(1.0);
        assert_eq!(plan_budget(&req).unwrap().lambda_hat, 1.0);
        req.splits = 1.0;
        assert!(plan_budget(&req).is_err());
    }

    #[test]
    fn ipp_plan_divides_remainder_by_c() {
        let mut req = PlanRequest::uniform(Algorithm::IppAdmm, 1.0, 7000, 5, 2);
        req.svt_epsilons = Some((0.01, 0.02));
        let plan = plan_budget(&req).unwrap();
        assert_relative_eq!(plan.rho_svt.rho(), 0.03f64.powi(2) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(plan.max_agent_cost().rho(), plan.rho_total.rho(), max_relative = 1e-13);
        assert_eq!(plan.releases, 15);
    }

    #[test]
    fn pp_ledger_totals() {
        let plan = plan_budget(&paper_request()).unwrap();
        let mut ledger = ZcdpLedger::new(5, 1e-4).unwrap();
        assert_eq!(ledger.total().unwrap(), ZcdpCost::ZERO);
        for _ in 0..30 {
            for a in 0..5 {
                ledger.charge_pp_iteration(a, &plan).unwrap();
            }
        }
        let expected = 30.0 * (plan.rho_i1.rho() + plan.rho_i2.rho());
        for c in ledger.per_agent() {
            assert!((c.rho() - expected).abs() < 1e-12);
        }
        assert!((ledger.total().unwrap().rho() - plan.rho_total.rho()).abs() < 1e-12);
        assert!(ledger.charge_pp_iteration(5, &plan).is_err());
    }

    #[test]
    fn pp_ledger_exact_conversion_meets_target() {
        let mut req = paper_request();
        req.conversion = RhoConversion::Exact;
        let plan = plan_budget(&req).unwrap();
        let mut ledger = ZcdpLedger::new(5, 1e-4).unwrap();
        for _ in 0..30 {
            for a in 0..5 {
                ledger.charge_pp_iteration(a, &plan).unwrap();
            }
        }
        assert!((ledger.epsilon().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ipp_ledger_events() {
        let mut req = PlanRequest::uniform(Algorithm::IppAdmm, 1.0, 7000, 5, 2);
        req.svt_epsilons = Some((0.1, 0.1));
        let plan = plan_budget(&req).unwrap();
        assert_relative_eq!(plan.rho_svt.rho(), 0.02, max_relative = 1e-14);
        let mut ledger = ZcdpLedger::new(2, 1e-4).unwrap();
        ledger.charge_ipp(0, &plan, IppEvent::SvtOpen).unwrap();
        ledger.charge_ipp(1, &plan, IppEvent::SvtOpen).unwrap();
        assert!(matches!(
            ledger.charge_ipp(0, &plan, IppEvent::SvtOpen),
            Err(Error::SvtAlreadyOpened(0))
        ));
        for _ in 0..15 {
            ledger.charge_ipp(0, &plan, IppEvent::Broadcast).unwrap();
        }
        assert_relative_eq!(ledger.agent(1).unwrap().rho(), 0.02, max_relative = 1e-14);
        assert_relative_eq!(
            ledger.agent(0).unwrap().rho(),
            0.02 + 15.0 * plan.per_release().rho(),
            max_relative = 1e-13
        );
        let report = ledger.report().unwrap();
        assert_eq!(report.total_rho, ledger.agent(0).unwrap().rho());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn serial_is_order_free(v in prop::collection::vec(0.0f64..10.0, 0..20)) {
                let costs: Vec<ZcdpCost> = v.iter().map(|&x| cost(x)).collect();
                let mut rev = costs.clone();
                rev.reverse();
                let a = serial_compose(&costs).rho();
                let b = serial_compose(&rev).rho();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            }

            #[test]
            fn parallel_is_idempotent(v in prop::collection::vec(0.0f64..10.0, 1..20)) {
                let costs: Vec<ZcdpCost> = v.iter().map(|&x| cost(x)).collect();
                let once = parallel_compose(&costs).unwrap();
                let twice = parallel_compose(&[once, once]).unwrap();
                prop_assert_eq!(once, twice);
                let mut doubled = costs.clone();
                doubled.extend(costs.iter().copied());
                prop_assert_eq!(parallel_compose(&doubled).unwrap(), once);
            }

            #[test]
            fn conversions_monotone_and_conservative(
                a in 1e-3f64..20.0, b in 1e-3f64..20.0, delta in 1e-9f64..0.5,
            ) {
                prop_assume!((a - b).abs() > 1e-9);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(dp_to_zcdp(lo, delta).unwrap() < dp_to_zcdp(hi, delta).unwrap());
                prop_assert!(zcdp_to_dp(cost(lo), delta).unwrap() < zcdp_to_dp(cost(hi), delta).unwrap());
                let back = zcdp_to_dp(dp_to_zcdp(lo, delta).unwrap(), delta).unwrap();
                prop_assert!(back >= lo);
            }
        }
    }
}

//! Logistic ERM objectives: the per-agent local function, the augmented
//! (optionally perturbed) ADMM subproblem, and the clipped quality score used
//! by the sparse-vector gate.

use ndarray::{Array1, ArrayView1};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::solver::Objective;

pub type ModelVector = Array1<f64>;

/// Curvature bound of the logistic loss, `0 < L'' <= 1/4`.
pub const LOGISTIC_C1: f64 = 0.25;

/// `ln(1 + e^{-z})` without overflow for large `|z|`.
pub fn logistic_loss(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `d/dz ln(1 + e^{-z}) = -1 / (1 + e^{z})`, always in `[-1, 0]`.
pub fn logistic_loss_deriv(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + z.exp())
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// `f_i(θ) = mean_n L(y_n θᵀx_n) + (λ̂/N)·½‖θ‖²` over one agent's data.
#[derive(Debug, Clone, Copy)]
pub struct LocalObjective<'a> {
    pub data: &'a Dataset,
    pub lambda_hat: f64,
    pub num_agents: usize,
}

impl<'a> LocalObjective<'a> {
    pub fn new(data: &'a Dataset, lambda_hat: f64, num_agents: usize) -> Result<Self> {
        if !(lambda_hat >= 0.0 && lambda_hat.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda_hat {lambda_hat} must be >= 0")));
        }
        if num_agents == 0 {
            return Err(Error::InvalidParameter("num_agents must be positive".into()));
        }
        Ok(Self {
            data,
            lambda_hat,
            num_agents,
        })
    }

    /// Regularizer weight `λ̂/N` carried by each agent.
    pub fn reg_weight(&self) -> f64 {
        self.lambda_hat / self.num_agents as f64
    }

    fn margins(&self, theta: ArrayView1<'_, f64>) -> Array1<f64> {
        self.data.features().dot(&theta) * self.data.labels()
    }

    fn regularizer(&self, theta: ArrayView1<'_, f64>) -> f64 {
        0.5 * self.reg_weight() * theta.dot(&theta)
    }

    /// Mean unregularized loss.
    pub fn mean_loss(&self, theta: ArrayView1<'_, f64>) -> f64 {
        self.margins(theta).mapv(logistic_loss).mean().unwrap_or(0.0)
    }

    /// `f_i` with each per-sample loss capped at `c_loss`; the regularizer is
    /// not clipped.
    pub fn clipped_value(&self, theta: ArrayView1<'_, f64>, c_loss: f64) -> f64 {
        let clipped = self
            .margins(theta)
            .mapv(|z| logistic_loss(z).min(c_loss))
            .mean()
            .unwrap_or(0.0);
        clipped + self.regularizer(theta)
    }
}

impl Objective for LocalObjective<'_> {
    fn dim(&self) -> usize {
        self.data.dimension()
    }

    fn value(&self, theta: ArrayView1<'_, f64>) -> f64 {
        self.mean_loss(theta) + self.regularizer(theta)
    }

    fn gradient(&self, theta: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.data.len() as f64;
        // d/dθ L(y θᵀx) = L'(y θᵀx)·y·x
        let weights = self.margins(theta).mapv(logistic_loss_deriv) * self.data.labels() / n;
        self.data.features().t().dot(&weights) + self.reg_weight() * &theta
    }
}

/// Local objective at `theta`.
pub fn local_objective(theta: &ModelVector, p: &LocalObjective<'_>) -> Result<f64> {
    check_dim(p.dim(), theta.len())?;
    Ok(p.value(theta.view()))
}

/// The ADMM primal subproblem
///
/// `F(θ) = base(θ) + (2λᵗ + b₁)ᵀθ + η Σ_j ‖½(θᵢᵗ + θⱼᵗ) − θ‖²`
///
/// With no `b₁` this is the non-private subproblem.
#[derive(Debug, Clone)]
pub struct AugmentedObjective<F> {
    base: F,
    linear: Array1<f64>,
    midpoints: Vec<Array1<f64>>,
    midpoint_sum: Array1<f64>,
    eta: f64,
}

impl<F: Objective> AugmentedObjective<F> {
    pub fn new(
        base: F,
        dual: &ModelVector,
        self_prev: &ModelVector,
        neighbor_prev: &[&ModelVector],
        eta: f64,
        noise_b1: Option<&ModelVector>,
    ) -> Result<Self> {
        let d = base.dim();
        check_dim(d, dual.len())?;
        check_dim(d, self_prev.len())?;
        for nb in neighbor_prev {
            check_dim(d, nb.len())?;
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta {eta} must be positive")));
        }
        let mut linear = 2.0 * dual;
        if let Some(b1) = noise_b1 {
            check_dim(d, b1.len())?;
            linear += b1;
        }
        let midpoints: Vec<Array1<f64>> = neighbor_prev.iter().map(|nb| 0.5 * (self_prev + *nb)).collect();
        let midpoint_sum = midpoints.iter().fold(Array1::zeros(d), |acc, m| acc + m);
        Ok(Self {
            base,
            linear,
            midpoints,
            midpoint_sum,
            eta,
        })
    }

    pub fn base(&self) -> &F {
        &self.base
    }
}

impl<F: Objective> Objective for AugmentedObjective<F> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, theta: ArrayView1<'_, f64>) -> f64 {
        let penalty: f64 = self
            .midpoints
            .iter()
            .map(|m| {
                let diff = m - &theta;
                diff.dot(&diff)
            })
            .sum();
        self.base.value(theta) + self.linear.dot(&theta) + self.eta * penalty
    }

    fn gradient(&self, theta: ArrayView1<'_, f64>) -> Array1<f64> {
        let k = self.midpoints.len() as f64;
        let penalty = 2.0 * self.eta * (k * &theta - &self.midpoint_sum);
        self.base.gradient(theta) + &self.linear + penalty
    }
}

/// Clipped quality score `Clip[f_i(θ_prev)] − Clip[f_i(θ̂)]`.
pub fn clipped_quality(
    theta_prev: &ModelVector,
    theta_hat: &ModelVector,
    p: &LocalObjective<'_>,
    c_loss: f64,
) -> Result<f64> {
    if c_loss.is_nan() || c_loss <= 0.0 {
        return Err(Error::InvalidParameter(format!("c_loss {c_loss} must be positive")));
    }
    check_dim(p.dim(), theta_prev.len())?;
    check_dim(p.dim(), theta_hat.len())?;
    Ok(p.clipped_value(theta_prev.view(), c_loss) - p.clipped_value(theta_hat.view(), c_loss))
}

//! First-order minimizer used for every local subproblem: gradient descent
//! with Armijo backtracking, stopping once the L2 gradient norm is at most
//! `beta`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A smooth objective over `R^d`.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, theta: ArrayView1<'_, f64>) -> f64;

    fn gradient(&self, theta: ArrayView1<'_, f64>) -> Array1<f64>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, theta: ArrayView1<'_, f64>) -> f64 {
        (**self).value(theta)
    }

    fn gradient(&self, theta: ArrayView1<'_, f64>) -> Array1<f64> {
        (**self).gradient(theta)
    }
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Gradient-norm threshold.
    pub beta: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
}

impl SolverConfig {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta {} must be positive", self.beta)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial_step {} must be positive",
                self.initial_step
            )));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 10f64.powf(-3.5),
            max_iterations: 10_000,
            initial_step: 1.0,
        }
    }
}

/// Result of a descent run, converged or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub theta: Array1<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Descent {
    pub fn into_result(self, beta: f64) -> Result<Descent> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                grad_norm: self.grad_norm,
                beta,
            })
        }
    }
}

/// Runs descent and reports the last iterate even when `beta` was not met.
pub fn descend<F: Objective>(objective: &F, start: Array1<f64>, cfg: &SolverConfig) -> Result<Descent> {
    cfg.validate()?;
    if start.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            actual: start.len(),
        });
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("start point is not finite".into()));
    }

    let mut theta = start;
    let mut value = objective.value(theta.view());
    let mut grad = objective.gradient(theta.view());
    let mut grad_norm = grad.dot(&grad).sqrt();
    let mut iterations = 0;

    while grad_norm > cfg.beta && iterations < cfg.max_iterations {
        let sq = grad_norm * grad_norm;
        let mut step = cfg.initial_step;
        let accepted = loop {
            let candidate = &theta - &(step * &grad);
            let cand_value = objective.value(candidate.view());
            if cand_value <= value - ARMIJO * step * sq {
                break Some((candidate, cand_value));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((next, next_value)) = accepted else {
            // line search stalled at rounding level
            break;
        };
        theta = next;
        value = next_value;
        grad = objective.gradient(theta.view());
        grad_norm = grad.dot(&grad).sqrt();
        iterations += 1;
    }

    Ok(Descent {
        converged: grad_norm <= cfg.beta,
        theta,
        value,
        grad_norm,
        iterations,
    })
}

/// Minimizes `objective` from `start` until `‖∇F‖₂ ≤ beta`.
///
/// Fails with [`Error::NotConverged`] if the threshold is not reached within
/// `max_iterations` steps or the line search stalls.
pub fn minimize<F: Objective>(objective: &F, start: Array1<f64>, cfg: &SolverConfig) -> Result<Descent> {
    descend(objective, start, cfg)?.into_result(cfg.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    struct Bowl {
        center: Array1<f64>,
    }

    impl Objective for Bowl {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&self, theta: ArrayView1<'_, f64>) -> f64 {
            let d = &theta - &self.center;
            0.5 * d.dot(&d)
        }
        fn gradient(&self, theta: ArrayView1<'_, f64>) -> Array1<f64> {
            &theta - &self.center
        }
    }

    #[test]
    fn quadratic_bowl() {
        let f = Bowl {
            center: array![3.0, -1.0],
        };
        let out = minimize(&f, array![0.0, 0.0], &SolverConfig::with_beta(1e-6)).unwrap();
        assert!(out.grad_norm <= 1e-6);
        assert!((&out.theta - &f.center).iter().all(|v| v.abs() <= 1e-6));
    }

    #[test]
    fn early_exit_when_start_is_stationary() {
        let f = Bowl { center: array![1.0] };
        let out = minimize(&f, array![1.0], &SolverConfig::with_beta(1e-6)).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.theta, array![1.0]);
    }

    #[test]
    fn reports_non_convergence() {
        let f = Bowl { center: array![1e6] };
        let cfg = SolverConfig {
            beta: 1e-12,
            max_iterations: 1,
            initial_step: 0.1,
        };
        assert!(matches!(
            minimize(&f, array![0.0], &cfg),
            Err(Error::NotConverged { iterations: 1, .. })
        ));
        let d = descend(&f, array![0.0], &cfg).unwrap();
        assert!(!d.converged);
        assert!(d.value < f.value(array![0.0].view()));
    }

    #[test]
    fn rejects_bad_config_and_start() {
        let f = Bowl { center: array![0.0] };
        assert!(minimize(&f, array![0.0], &SolverConfig::with_beta(0.0)).is_err());
        assert!(minimize(&f, array![0.0, 1.0], &SolverConfig::default()).is_err());
        assert!(minimize(&f, array![f64::NAN], &SolverConfig::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let f = Bowl {
            center: array![0.3, 0.7, -2.0],
        };
        let cfg = SolverConfig::with_beta(1e-9);
        let a = minimize(&f, array![5.0, 5.0, 5.0], &cfg).unwrap();
        let b = minimize(&f, array![5.0, 5.0, 5.0], &cfg).unwrap();
        assert_eq!(a, b);
    }
}

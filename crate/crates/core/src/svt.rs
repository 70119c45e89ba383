//! Sparse-vector gate deciding whether an agent broadcasts its new solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{laplace_scalar, RngHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvtDecision {
    Above,
    Below,
    /// The broadcast cap is used up; nothing was compared.
    Exhausted,
}

/// zCDP cost of a gate with budgets `(ε₁, ε₂)`: `(ε₁+ε₂)²/2`.
pub fn svt_rho(eps1: f64, eps2: f64) -> f64 {
    let e = eps1 + eps2;
    0.5 * e * e
}

/// Splits `eps_total` as `ε₁ : ε₂ = 1 : (2c)^{2/3}`.
pub fn svt_split_ratio(c_max: usize, eps_total: f64) -> Result<(f64, f64)> {
    if c_max == 0 {
        return Err(Error::InvalidParameter("c_max must be at least 1".into()));
    }
    if !(eps_total > 0.0 && eps_total.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eps_total {eps_total} must be positive"
        )));
    }
    let ratio = (2.0 * c_max as f64).powf(2.0 / 3.0);
    let eps1 = eps_total / (1.0 + ratio);
    Ok((eps1, eps_total - eps1))
}

/// `(ε₁, ε₂)` for a gate costing `fraction · rho_total`, split by
/// [`svt_split_ratio`].
pub fn svt_budget(rho_total: f64, fraction: f64, c_max: usize) -> Result<(f64, f64)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "SVT budget fraction {fraction} not in (0, 1)"
        )));
    }
    if !(rho_total > 0.0 && rho_total.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rho_total {rho_total} must be positive"
        )));
    }
    svt_split_ratio(c_max, (2.0 * fraction * rho_total).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvtGate {
    alpha: f64,
    noisy_threshold: f64,
    c_max: usize,
    count: usize,
    eps1: f64,
    eps2: f64,
    c_loss: f64,
    query_noise_scale: f64,
}

impl SvtGate {
    /// Draws the noisy threshold `α + Lap(2·c·C_loss/ε₁)` once.
    pub fn new(alpha: f64, c_max: usize, eps1: f64, eps2: f64, c_loss: f64, rng: &mut RngHandle) -> Result<Self> {
        if c_max == 0 {
            return Err(Error::InvalidParameter("c_max must be at least 1".into()));
        }
        for (name, v) in [("eps1", eps1), ("eps2", eps2), ("c_loss", c_loss)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if alpha.is_nan() {
            return Err(Error::InvalidParameter("alpha is NaN".into()));
        }
        let c = c_max as f64;
        let noisy_threshold = alpha + laplace_scalar(threshold_noise_scale(c_max, c_loss, eps1), rng)?;
        Ok(Self {
            alpha,
            noisy_threshold,
            c_max,
            count: 0,
            eps1,
            eps2,
            c_loss,
            query_noise_scale: 4.0 * c * c_loss / eps2,
        })
    }

    /// Compares `quality + Lap(4·c·C_loss/ε₂)` against the noisy threshold.
    pub fn check(&mut self, quality: f64, rng: &mut RngHandle) -> Result<SvtDecision> {
        if self.is_exhausted() {
            return Ok(SvtDecision::Exhausted);
        }
        let nu = laplace_scalar(self.query_noise_scale, rng)?;
        if quality + nu >= self.noisy_threshold {
            self.count += 1;
            Ok(SvtDecision::Above)
        } else {
            Ok(SvtDecision::Below)
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.count >= self.c_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn c_max(&self) -> usize {
        self.c_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn noisy_threshold(&self) -> f64 {
        self.noisy_threshold
    }

    pub fn query_noise_scale(&self) -> f64 {
        self.query_noise_scale
    }

    pub fn threshold_noise_scale(&self) -> f64 {
        threshold_noise_scale(self.c_max, self.c_loss, self.eps1)
    }

    pub fn rho(&self) -> f64 {
        svt_rho(self.eps1, self.eps2)
    }
}

fn threshold_noise_scale(c_max: usize, c_loss: f64, eps1: f64) -> f64 {
    2.0 * c_max as f64 * c_loss / eps1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet() -> RngHandle {
        RngHandle::disabled(0, 0)
    }

    #[test]
    fn budget_fraction_sets_gate_cost() {
        let (e1, e2) = svt_budget(0.04, 0.25, 15).unwrap();
        assert_relative_eq!(svt_rho(e1, e2), 0.01, max_relative = 1e-12);
        assert_relative_eq!(e2 / e1, 30f64.powf(2.0 / 3.0), max_relative = 1e-12);
        assert!(svt_budget(0.04, 1.0, 15).is_err());
        assert!(svt_budget(0.0, 0.5, 15).is_err());
    }

    #[test]
    fn disabled_noise_gives_exact_threshold() {
        let gate = SvtGate::new(1.0, 3, 0.1, 0.9, 2.0, &mut quiet()).unwrap();
        assert_eq!(gate.noisy_threshold(), 1.0);
    }

    #[test]
    fn threshold_is_reproducible() {
        let a = SvtGate::new(0.0, 15, 0.1, 0.9, 2.0, &mut RngHandle::new(3, 2)).unwrap();
        let b = SvtGate::new(0.0, 15, 0.1, 0.9, 2.0, &mut RngHandle::new(3, 2)).unwrap();
        assert_eq!(a.noisy_threshold(), b.noisy_threshold());
    }

    #[test]
    fn noise_scales() {
        let gate = SvtGate::new(0.0, 15, 0.5, 0.25, 2.0, &mut quiet()).unwrap();
        assert_eq!(gate.threshold_noise_scale(), 60.0 / 0.5);
        assert_eq!(gate.query_noise_scale(), 120.0 / 0.25);
    }

    #[test]
    fn above_below_exhausted() {
        let mut rng = quiet();
        let mut gate = SvtGate::new(1.0, 2, 0.1, 0.9, 2.0, &mut rng).unwrap();
        assert_eq!(gate.check(5.0, &mut rng).unwrap(), SvtDecision::Above);
        assert_eq!(gate.count(), 1);
        assert_eq!(gate.check(0.5, &mut rng).unwrap(), SvtDecision::Below);
        assert_eq!(gate.count(), 1);
        // ties count as above
        assert_eq!(gate.check(1.0, &mut rng).unwrap(), SvtDecision::Above);
        assert_eq!(gate.check(1e9, &mut rng).unwrap(), SvtDecision::Exhausted);
        assert_eq!(gate.count(), 2);
    }

    #[test]
    fn exhausted_draws_no_noise() {
        let mut thr = RngHandle::new(1, 0);
        let mut gate = SvtGate::new(f64::NEG_INFINITY, 1, 0.1, 0.9, 2.0, &mut thr).unwrap();
        let mut q = RngHandle::new(1, 1);
        assert_eq!(gate.check(0.0, &mut q).unwrap(), SvtDecision::Above);
        let before = q.clone().uniform();
        assert_eq!(gate.check(0.0, &mut q).unwrap(), SvtDecision::Exhausted);
        assert_eq!(q.uniform(), before);
    }

    #[test]
    fn split_ratio() {
        let (e1, e2) = svt_split_ratio(15, 1.0).unwrap();
        assert_relative_eq!(e2 / e1, 30f64.powf(2.0 / 3.0), max_relative = 1e-12);
        assert_relative_eq!(e2 / e1, 9.6549, max_relative = 1e-4);
        assert_relative_eq!(e1, 0.09385, max_relative = 1e-3);
        assert_relative_eq!(e2, 0.90615, max_relative = 1e-4);
        assert_eq!(e1 + e2, 1.0);
        let (e1, e2) = svt_split_ratio(1, 2.0).unwrap();
        assert_relative_eq!(e2 / e1, 1.5874, max_relative = 1e-4);
        assert!(svt_split_ratio(0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SvtGate::new(0.0, 0, 0.1, 0.1, 1.0, &mut quiet()).is_err());
        assert!(SvtGate::new(0.0, 1, 0.0, 0.1, 1.0, &mut quiet()).is_err());
        assert!(SvtGate::new(0.0, 1, 0.1, 0.1, -1.0, &mut quiet()).is_err());
    }

    #[test]
    fn gate_rho() {
        let gate = SvtGate::new(0.0, 1, 0.1, 0.1, 1.0, &mut quiet()).unwrap();
        assert_relative_eq!(gate.rho(), 0.02, max_relative = 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn gate_never_exceeds_cap(
            c_max in 1usize..20,
            qualities in proptest::collection::vec(-2.0f64..2.0, 0..200),
            seed in 0u64..1000,
        ) {
            let mut rng = RngHandle::new(seed, 0);
            let mut gate = SvtGate::new(0.0, c_max, 0.5, 0.5, 1.0, &mut rng).unwrap();
            let mut aboves = 0;
            for q in qualities {
                match gate.check(q, &mut rng).unwrap() {
                    SvtDecision::Above => aboves += 1,
                    SvtDecision::Exhausted => proptest::prop_assert_eq!(aboves, c_max),
                    SvtDecision::Below => {}
                }
            }
            proptest::prop_assert!(aboves <= c_max);
            proptest::prop_assert_eq!(gate.count(), aboves);
        }
    }
}

//! Evaluation metrics reported every round.

use ndarray::Array1;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{LocalObjective, ModelVector};

fn check_dims(thetas: &[ModelVector], d: usize) -> Result<()> {
    match thetas.iter().find(|t| t.len() != d) {
        Some(t) => Err(Error::DimensionMismatch {
            expected: d,
            actual: t.len(),
        }),
        None => Ok(()),
    }
}

/// Fraction of misclassified test samples, averaged over the agents' models.
/// `sign(0)` predicts `+1`.
pub fn error_rate(thetas: &[ModelVector], test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidDataset("empty test set".into()));
    }
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("no models to evaluate".into()));
    }
    check_dims(thetas, test.dimension())?;
    let n = test.len() as f64;
    let total: f64 = thetas
        .iter()
        .map(|theta| {
            let scores = test.features().dot(theta);
            let wrong = scores
                .iter()
                .zip(test.labels())
                .filter(|&(&s, &y)| (if s >= 0.0 { 1.0 } else { -1.0 }) != y)
                .count();
            wrong as f64 / n
        })
        .sum();
    Ok(total / thetas.len() as f64)
}

/// `(1/N) Σ_i mean_n L(y θ_iᵀx)` with no regularizer.
pub fn average_loss(thetas: &[ModelVector], parts: &[Dataset]) -> Result<f64> {
    if thetas.len() != parts.len() || parts.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} models for {} datasets",
            thetas.len(),
            parts.len()
        )));
    }
    let mut total = 0.0;
    for (theta, data) in thetas.iter().zip(parts) {
        check_dims(std::slice::from_ref(theta), data.dimension())?;
        total += LocalObjective::new(data, 0.0, 1)?.mean_loss(theta.view());
    }
    Ok(total / parts.len() as f64)
}

/// `max_i ‖θ_i − θ̄‖₂`.
pub fn consensus_residual(thetas: &[ModelVector]) -> f64 {
    let Some(first) = thetas.first() else {
        return 0.0;
    };
    let mean = thetas.iter().fold(Array1::<f64>::zeros(first.len()), |acc, t| acc + t) / thetas.len() as f64;
    thetas
        .iter()
        .map(|t| {
            let d = t - &mean;
            d.dot(&d).sqrt()
        })
        .fold(0.0, f64::max)
}

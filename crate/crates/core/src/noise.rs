//! Seedable Gaussian and Laplace samplers.
//!
//! Each `(seed, stream_id)` pair selects an independent ChaCha20 stream. A
//! disabled handle yields zeros for Gaussian draws and the median (zero) for
//! Laplace draws; it exists for reduction and determinism tests.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Open01};

use crate::error::{Error, Result};

/// What a stream is used for. Streams are keyed by `(agent, purpose)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    ObjectiveNoise = 0,
    OutputNoise = 1,
    SvtThreshold = 2,
    SvtQuery = 3,
}

const PURPOSES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Enabled,
    /// Every draw is zero. Only for tests and `--insecure-no-noise`.
    Disabled,
}

#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream_id: u64,
    rng: Option<ChaCha20Rng>,
}

impl RngHandle {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng: Some(rng),
        }
    }

    pub fn disabled(seed: u64, stream_id: u64) -> Self {
        Self {
            seed,
            stream_id,
            rng: None,
        }
    }

    pub fn for_agent(seed: u64, agent: usize, purpose: StreamPurpose, mode: NoiseMode) -> Self {
        let stream = agent as u64 * PURPOSES + purpose as u64;
        match mode {
            NoiseMode::Enabled => Self::new(seed, stream),
            NoiseMode::Disabled => Self::disabled(seed, stream),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn is_disabled(&self) -> bool {
        self.rng.is_none()
    }

    /// Uniform draw on the open interval (0, 1); 0.5 when disabled.
    pub fn uniform(&mut self) -> f64 {
        match &mut self.rng {
            Some(rng) => Open01.sample(rng),
            None => 0.5,
        }
    }
}

/// `d` iid draws from `N(0, sigma²)`.
pub fn gaussian_vector(sigma: f64, d: usize, rng: &mut RngHandle) -> Result<Array1<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma {sigma} must be finite and >= 0"
        )));
    }
    let Some(inner) = rng.rng.as_mut() else {
        return Ok(Array1::zeros(d));
    };
    if sigma == 0.0 {
        return Ok(Array1::zeros(d));
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    Ok(Array1::from_shape_simple_fn(d, || normal.sample(inner)))
}

/// Inverse CDF of `Lap(b)` at `u ∈ (0, 1)`.
pub fn laplace_from_uniform(b: f64, u: f64) -> f64 {
    if u < 0.5 {
        b * (2.0 * u).ln()
    } else {
        -b * (2.0 - 2.0 * u).ln()
    }
}

/// One draw from the zero-mean Laplace distribution with scale `b`.
pub fn laplace_scalar(b: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("laplace scale {b} must be positive")));
    }
    let u = rng.uniform();
    Ok(laplace_from_uniform(b, u))
}

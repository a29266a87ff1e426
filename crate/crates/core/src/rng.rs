//! Seeded random streams and the elementary samplers used by the Gibbs
//! updates. Exponential and Gamma draws are parameterized by RATE throughout.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// The same pair always replays the same sequence; distinct stream ids on the
/// same seed select independent ChaCha streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and positive, got {v}")))
    }
}

/// One draw from N(mean, var).
pub fn sample_normal(stream: &mut RngStream, mean: f64, var: f64) -> Result<f64> {
    positive("variance", var)?;
    if !mean.is_finite() {
        return Err(Error::invalid(format!("normal mean must be finite, got {mean}")));
    }
    Ok(mean + var.sqrt() * stream.standard_normal())
}

/// One draw from Exp(rate), mean `1 / rate`.
pub fn sample_exponential(stream: &mut RngStream, rate: f64) -> Result<f64> {
    positive("exponential rate", rate)?;
    let e: f64 = Exp1.sample(stream);
    Ok(e / rate)
}

/// One draw from Gamma(shape, rate), density ∝ x^(shape−1) e^(−rate·x).
pub fn sample_gamma(stream: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    positive("gamma shape", shape)?;
    positive("gamma rate", rate)?;
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::invalid(format!("gamma: {e}")))?;
    Ok(g.sample(stream))
}

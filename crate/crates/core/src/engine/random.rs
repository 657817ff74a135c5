use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EngineError;

/// Seedable generator owned by a single run.
///
/// ChaCha8 is portable across platforms, so a seed reproduces the same
/// trace everywhere.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream derived from the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in (0, 1].
    pub fn unit_open_closed(&mut self) -> f64 {
        1.0 - self.rng.gen::<f64>()
    }

    /// Uniform draw in [0, 1).
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn exponential(&mut self, mean: f64) -> Result<f64, EngineError> {
        sample_exponential(self, mean)
    }
}

/// Inverse-transform exponential sample: `-mean * ln(u)` with `u` in (0, 1].
///
/// `u = 1` gives exactly zero; it has probability 2^-53 and is nudged to the
/// smallest positive value so that every sample is strictly positive.
pub fn exponential_from_unit(u: f64, mean: f64) -> f64 {
    let x = -mean * u.ln();
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}

pub fn sample_exponential(rng: &mut RandomSource, mean: f64) -> Result<f64, EngineError> {
    if mean.is_nan() || mean <= 0.0 || !mean.is_finite() {
        return Err(EngineError::NonPositiveMean(mean));
    }
    let u = rng.unit_open_closed();
    Ok(exponential_from_unit(u, mean))
}

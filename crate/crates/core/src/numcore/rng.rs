//! Seedable, splittable random stream.
//!
//! Backed by ChaCha8 (`rand_chacha`). A root seed fixes the key; each
//! consumer draws from its own 64-bit ChaCha stream id, so split streams
//! never overlap. Child ids are derived with the SplitMix64 finalizer
//! (constants `0x9E3779B97F4A7C15`, `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`).
//! Integer sampling is done on `u64` so results do not depend on the
//! platform word size.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConfigError, Tensor2};

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream `i`. Does not advance `self`.
    pub fn split(&self, i: u64) -> Self {
        let child = splitmix64(self.stream ^ splitmix64(i.wrapping_add(1)));
        Self::with_stream(self.seed, child)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller (cosine branch only).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, n)`, rejection sampled.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

pub fn rand_uniform(rng: &mut Rng, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Tensor2, ConfigError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ConfigError(format!("uniform range [{lo}, {hi}) is empty or not finite")));
    }
    let data = (0..rows * cols).map(|_| rng.uniform_range(lo, hi)).collect();
    Ok(Tensor2::from_vec(rows, cols, data).expect("sized buffer"))
}

pub fn rand_normal(rng: &mut Rng, mean: f64, std: f64, rows: usize, cols: usize) -> Result<Tensor2, ConfigError> {
    if !(std.is_finite() && mean.is_finite() && std >= 0.0) {
        return Err(ConfigError(format!("normal(mean={mean}, std={std}) is invalid")));
    }
    let data = (0..rows * cols).map(|_| mean + std * rng.standard_normal()).collect();
    Ok(Tensor2::from_vec(rows, cols, data).expect("sized buffer"))
}

//! Reproducible Wiener increments.
//!
//! Each Wiener process draws from its own ChaCha20 stream: the 64-bit seed
//! fixes the key and the stream id selects an independent keystream. A
//! trajectory with index `i` uses streams `2i` (for `W_1`) and `2i + 1`
//! (for `W_2`), so ensembles give the same paths regardless of how they are
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{require_positive, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub seed: u64,
    pub dt: f64,
    pub n_steps: usize,
    /// Stream ids for `W_1`, `W_2`.
    pub streams: [u64; 2],
    /// Store every `record_every`-th state; record increments are summed
    /// over each stride.
    pub record_every: usize,
}

impl NoiseConfig {
    pub fn new(seed: u64, dt: f64, n_steps: usize) -> Self {
        Self {
            seed,
            dt,
            n_steps,
            streams: [0, 1],
            record_every: 1,
        }
    }

    /// Streams `[2i, 2i + 1]` for ensemble member `i`.
    pub fn for_trajectory(mut self, index: u64) -> Self {
        self.streams = [2 * index, 2 * index + 1];
        self
    }

    pub fn with_streams(mut self, streams: [u64; 2]) -> Self {
        self.streams = streams;
        self
    }

    pub fn recording_every(mut self, stride: usize) -> Self {
        self.record_every = stride.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("dt", self.dt)?;
        Ok(())
    }

    pub fn wiener(&self) -> WienerPair {
        WienerPair::new(self.seed, self.streams, self.dt)
    }

    /// The full increment sequence this configuration generates.
    pub fn wiener_path(&self) -> Vec<[f64; 2]> {
        let mut w = self.wiener();
        (0..self.n_steps).map(|_| w.next_increment()).collect()
    }
}

/// Two independent Wiener processes sampled on a fixed grid.
#[derive(Debug, Clone)]
pub struct WienerPair {
    rngs: [ChaCha20Rng; 2],
    sqrt_dt: f64,
}

impl WienerPair {
    pub fn new(seed: u64, streams: [u64; 2], dt: f64) -> Self {
        let make = |stream| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        Self {
            rngs: [make(streams[0]), make(streams[1])],
            sqrt_dt: dt.sqrt(),
        }
    }

    pub fn next_increment(&mut self) -> [f64; 2] {
        let z0: f64 = self.rngs[0].sample(StandardNormal);
        let z1: f64 = self.rngs[1].sample(StandardNormal);
        [z0 * self.sqrt_dt, z1 * self.sqrt_dt]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_stream_separated() {
        let cfg = NoiseConfig::new(7, 0.01, 100);
        assert_eq!(cfg.wiener_path(), cfg.wiener_path());
        let swapped = cfg.with_streams([1, 0]).wiener_path();
        for (a, b) in cfg.wiener_path().iter().zip(&swapped) {
            assert_eq!(a[0], b[1]);
            assert_eq!(a[1], b[0]);
        }
        assert_ne!(cfg.wiener_path(), cfg.for_trajectory(1).wiener_path());
    }

    #[test]
    fn increment_statistics() {
        let dt = 0.01;
        let n = 200_000;
        let path = NoiseConfig::new(11, dt, n).wiener_path();
        for k in 0..2 {
            let mean = path.iter().map(|w| w[k]).sum::<f64>() / n as f64;
            let var = path.iter().map(|w| (w[k] - mean).powi(2)).sum::<f64>() / n as f64;
            // standard error of the mean is sqrt(dt/n)
            assert!(mean.abs() < 3.0 * (dt / n as f64).sqrt(), "{mean}");
            assert!((var / dt - 1.0).abs() < 0.02, "{var}");
        }
        let cross = path.iter().map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        assert!(cross.abs() < 4.0 * dt / (n as f64).sqrt());
    }
}

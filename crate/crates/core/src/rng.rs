//! Counter-based random streams.
//!
//! A draw is addressed by `(seed, stream, index)`. The stream is a ChaCha8
//! stream id and the index is the 64-bit word position, so any worker can
//! regenerate any draw without touching shared state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::scalar::Scalar;

/// Uniform and normal variates for one stream (a path, a sample, ...).
#[derive(Clone)]
pub struct CounterStream {
    rng: ChaCha8Rng,
    normal: Normal,
}

impl CounterStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(0);
        Self {
            rng,
            normal: Normal::new(0.0, 1.0).expect("unit normal"),
        }
    }

    /// Jumps to draw number `index` (each draw consumes two 32-bit words).
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(u128::from(index) * 2);
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform on `[lo, hi]`.
    pub fn uniform_in<S: Scalar>(&mut self, lo: S, hi: S) -> S {
        lo + (hi - lo) * S::lit(self.uniform())
    }

    /// Standard normal by inversion of the CDF.
    pub fn normal<S: Scalar>(&mut self) -> S {
        let u = self.uniform();
        S::lit(self.normal.inverse_cdf(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seek_addresses_the_same_draw() {
        let mut a = CounterStream::new(11, 3);
        let draws: Vec<f64> = (0..10).map(|_| a.uniform()).collect();
        let mut b = CounterStream::new(11, 3);
        b.seek(7);
        assert_eq!(b.uniform(), draws[7]);
    }

    #[test]
    fn streams_differ() {
        let mut a = CounterStream::new(11, 0);
        let mut b = CounterStream::new(11, 1);
        assert_ne!(a.uniform(), b.uniform());
    }

    #[test]
    fn uniform_is_open_interval() {
        let mut s = CounterStream::new(0, 0);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }
}

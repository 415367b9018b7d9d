//! Seeded random streams.
//!
//! Every stochastic operation takes a [`Stream`] explicitly. Streams are
//! ChaCha8-backed, so a (seed, salt) pair fixes the byte sequence on every
//! platform. Independent parts of a run (data collection, each ensemble
//! member, each epoch's rollouts, evaluation) derive their own child streams
//! with [`Stream::child`], which keeps results invariant under reordering or
//! parallelization of those parts.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

/// SplitMix64 step, used to mix seeds and salts into child seeds.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic random stream.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    seed: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }

    /// Derives an independent stream from this stream's seed, a purpose salt,
    /// and an index. Does not consume any state from `self`.
    pub fn child(&self, salt: u64, index: u64) -> Stream {
        let mixed = splitmix64(self.seed ^ splitmix64(salt) ^ splitmix64(index.wrapping_mul(0x9e37)));
        Stream::new(mixed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in (0, 1].
    fn uniform_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.uniform() * (hi - lo)
    }

    /// Standard normal via Box-Muller (cosine branch).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform_open_low();
        let u2 = self.uniform();
        math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * math::PI * u2)
    }

    /// Normal with the given standard deviation.
    pub fn normal_scaled(&mut self, std: f64) -> f64 {
        if std == 0.0 {
            0.0
        } else {
            std * self.normal()
        }
    }

    /// Unbiased-enough index in [0, bound) via the widening-multiply trick.
    pub fn index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// A shuffled permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

//! Counter-addressed random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream selected
//! by `(seed, stream id)`, and positioned by a draw index. Each standard normal
//! consumes exactly two 64-bit words, so the `k`-th normal of a stream can be
//! reached directly and results never depend on evaluation order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::ModeIndex;

const TAG_SHIFT: u32 = 60;

/// Namespaces keep stream ids of different consumers disjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Namespace {
    Noise = 1,
    TestField = 2,
    Medium = 3,
    Permutation = 4,
    Auxiliary = 5,
}

/// Stream id for a lattice mode within a namespace.
pub fn mode_stream(ns: Namespace, s: ModeIndex) -> u64 {
    let a = (s.s1 as i64 + (1 << 29)) as u64 & ((1 << 30) - 1);
    let b = (s.s2 as i64 + (1 << 29)) as u64 & ((1 << 30) - 1);
    ((ns as u64) << TAG_SHIFT) | (a << 30) | b
}

/// Stream id for a plain counter within a namespace.
pub fn index_stream(ns: Namespace, index: u64) -> u64 {
    ((ns as u64) << TAG_SHIFT) | (index & ((1 << TAG_SHIFT) - 1))
}

/// A positioned random stream.
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Stream positioned at its `index`-th draw (uniform or normal).
    pub fn at(seed: u64, stream: u64, index: u64) -> Self {
        let mut s = Self::new(seed, stream);
        s.rng.set_word_pos(index as u128 * 4);
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`. Consumes two words to stay aligned with normals.
    pub fn uniform(&mut self) -> f64 {
        let x = self.rng.next_u64();
        let _ = self.rng.next_u64();
        (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box-Muller, using exactly two words.
    pub fn normal(&mut self) -> f64 {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        // u1 in (0, 1] so the log is finite.
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..n` (n > 0), one draw.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// The `index`-th standard normal of a stream, without walking it.
pub fn normal_at(seed: u64, stream: u64, index: u64) -> f64 {
    Stream::at(seed, stream, index).normal()
}

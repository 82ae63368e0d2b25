//! Deterministic random streams for path simulation.
//!
//! Seeds must be portable: the same `(master_seed, path_index)` pair has to
//! reproduce the same path on any platform, any thread count, and in any
//! reimplementation of this crate. The derivation is therefore fixed, in
//! full, as follows:
//!
//! 1. **Per-path seed.** `path_seed(master, i)` is the `(i+1)`-th output of
//!    the SplitMix64 sequence seeded with `master`:
//!    `mix64(master + (i+1) * 0x9E3779B97F4A7C15)` (wrapping arithmetic),
//!    where `mix64` is the standard SplitMix64 finalizer (see [`mix64`]).
//! 2. **Path generator.** A path's stream is ChaCha12 keyed with the 32-byte
//!    little-endian concatenation of the first four SplitMix64 outputs of the
//!    path seed; block counter and nonce are zero. 64-bit draws are taken in
//!    ChaCha's native output order ([`rand_chacha::ChaCha12Rng::next_u64`]).
//! 3. **Uniforms.** A draw in `[0,1)` takes the top 53 bits of one `u64`:
//!    `(bits >> 11) as f64 * 2^-53`. A draw in `(0,1]` is `1 - uniform01()`.
//! 4. **Exponential.** `Exp(rate)` is sampled by inversion: `-ln(u) / rate`
//!    with `u` drawn in `(0,1]`.
//! 5. **Categorical.** Given probabilities `p[0..n]`, draw `u` in `[0,1)` and
//!    return the first index whose running prefix sum (ascending index)
//!    exceeds `u`; if rounding exhausts the row, return the last index with
//!    positive probability.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `(index+1)`-th SplitMix64 output of the sequence seeded with `master`.
#[inline]
pub fn path_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// A self-contained random stream for one simulated path.
pub struct PathRng {
    inner: ChaCha12Rng,
}

impl PathRng {
    /// Builds the stream for a 64-bit seed per the module-level derivation.
    pub fn from_seed(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        PathRng {
            inner: ChaCha12Rng::from_seed(key),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(0, 1]`.
    #[inline]
    pub fn uniform01_open_low(&mut self) -> f64 {
        1.0 - self.uniform01()
    }

    /// Exponential draw with the given rate (mean `1/rate`), by inversion.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -self.uniform01_open_low().ln() / rate
    }

    /// Samples an index from a probability row by prefix-sum inversion.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform01();
        let mut cum = 0.0;
        for (i, p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return i;
            }
        }
        // Rounding left a sliver of mass uncovered; fall back to the last
        // index that carries probability.
        probs
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("categorical row has no positive mass")
    }
}

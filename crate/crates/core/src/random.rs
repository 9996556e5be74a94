//! Seeded, platform-independent random streams.
//!
//! Every random draw in the crate flows through [`NoiseSource`]. The production
//! implementation is [`RandomStream`], a ChaCha8 generator addressed by a
//! `(seed, stream_id)` pair, so identical addresses reproduce identical
//! sequences on every platform and under every thread schedule.
//! [`FixedUniform`] pins every uniform draw to a constant, which makes the
//! Laplace sampler return exactly zero at `0.5`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source of raw bits and open-interval uniforms.
pub trait NoiseSource {
    fn next_u64(&mut self) -> u64;

    /// Uniform draw on the open interval (0, 1).
    fn uniform_open(&mut self) -> f64 {
        // 53 random mantissa bits, offset by half a step so 0 and 1 are unreachable.
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (multiply-shift; bias below 2^-64 * bound).
    fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }
}

impl<S: NoiseSource + ?Sized> NoiseSource for &mut S {
    fn next_u64(&mut self) -> u64 {
        (**self).next_u64()
    }
    fn uniform_open(&mut self) -> f64 {
        (**self).uniform_open()
    }
    fn below(&mut self, bound: usize) -> usize {
        (**self).below(bound)
    }
}

/// Counter-based stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream; a pure function of `(seed, stream_id, index)`.
    pub fn substream(&self, index: u64) -> RandomStream {
        RandomStream::new(self.seed, mix(self.stream_id, index))
    }
}

/// SplitMix64 finaliser over the pair, used to derive child stream ids.
fn mix(parent: u64, index: u64) -> u64 {
    let mut z = parent
        .rotate_left(29)
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl NoiseSource for RandomStream {
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

impl RngCore for RandomStream {
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

/// Returns `value` for every uniform draw and a plain counter for raw bits.
///
/// With `value = 0.5` every Laplace draw is exactly zero and tie-breaking is
/// deterministic, which turns each private statistic into its public one.
#[derive(Clone, Debug)]
pub struct FixedUniform {
    value: f64,
    counter: u64,
}

impl FixedUniform {
    pub fn new(value: f64) -> Self {
        assert!(value > 0.0 && value < 1.0, "uniform must lie in (0, 1)");
        Self { value, counter: 0 }
    }

    /// Zero-noise stream.
    pub fn median() -> Self {
        Self::new(0.5)
    }
}

impl NoiseSource for FixedUniform {
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        self.counter
    }
    fn uniform_open(&mut self) -> f64 {
        self.value
    }
    fn below(&mut self, _bound: usize) -> usize {
        0
    }
}

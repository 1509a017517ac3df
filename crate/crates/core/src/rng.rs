//! Seed splitting.
//!
//! Every random draw in a run descends from one `u64` seed. Each consumer gets
//! its own ChaCha8 stream: the generator is seeded with the run seed and the
//! 64-bit stream id is `(purpose << 32) | index`, so streams never overlap and
//! adding a consumer never perturbs the draws of another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant is the upper half of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Stream {
    Topology = 1,
    Mobility = 2,
    Fading = 3,
    Exploration = 4,
    Epoch = 5,
    Completion = 6,
}

/// Generator for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | (index & 0xFFFF_FFFF));
    rng
}

/// Derived child seed, for components that take a plain seed (e.g. one
/// simulator instance per training epoch).
pub fn child_seed(seed: u64, purpose: Stream, index: u64) -> u64 {
    stream(seed, purpose, index).next_u64()
}

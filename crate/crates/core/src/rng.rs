//! Deterministic random streams and seed derivation.
//!
//! Every stochastic component draws from a [`SimRng`] (ChaCha8), which is
//! portable and bit-reproducible across platforms. A simulation run owns one
//! seed; its independent input streams are separated by ChaCha stream ids
//! rather than by re-seeding, so adding a stream never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used inside a single model run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Signs = 1,
    RelativePrices = 2,
    SpectrumSource = 3,
    Cancellation = 4,
}

/// Rng seeded from a 64-bit seed on the default stream.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Rng for one named input stream of a run.
pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for repetition `rep` of sweep cell `cell`.
///
/// The three words are absorbed one at a time, each followed by a full
/// SplitMix64 avalanche: `h = mix(mix(mix(master + G) ^ cell + 2G) ^ rep + 3G)`
/// with `G = 0x9E3779B97F4A7C15`. For a fixed master and cell the map from
/// `rep` is a bijection, so distinct repetitions can never collide. This
/// formula is part of the reproducibility contract; changing it changes every
/// derived seed.
pub fn derive_seed(master: u64, cell: u64, rep: u64) -> u64 {
    let h = mix64(master.wrapping_add(GOLDEN));
    let h = mix64((h ^ cell).wrapping_add(GOLDEN.wrapping_mul(2)));
    mix64((h ^ rep).wrapping_add(GOLDEN.wrapping_mul(3)))
}

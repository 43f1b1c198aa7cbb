//! Deterministic random sub-streams.
//!
//! Every stochastic routine takes a 64-bit master seed. Independent
//! sub-streams (one per sample column, one per Monte Carlo replicate) are
//! obtained by mixing the master seed with the stream index:
//!
//! ```text
//! derive_seed(master, index) = splitmix64(master ^ splitmix64(index + 0x9E3779B97F4A7C15))
//! ```
//!
//! where `splitmix64` is the finalizer of Steele, Lea & Flood's SplitMix64
//! generator. The derived seed initializes a ChaCha8 generator
//! (`ChaCha8Rng::seed_from_u64`). A stream therefore depends only on
//! `(master, index)`: column order does not perturb other columns, and
//! replicate `r` draws the same numbers whether it runs first, last, serially
//! or on another thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// Generator for sub-stream `index` of `master`.
pub fn stream(master: u64, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

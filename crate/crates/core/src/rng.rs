//! Deterministic randomness helpers.
//!
//! Edge indicators are drawn from a counter-style hash keyed by
//! `(seed, min(u,v), max(u,v))`, so the same seed yields the same graph
//! regardless of iteration order or platform. Everything else (subset
//! sampling, shuffles) uses a seeded ChaCha stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit hash of an unordered vertex pair under a seed.
#[inline]
pub fn pair_hash(seed: u64, u: usize, v: usize) -> u64 {
    let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
    let mut h = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    h = splitmix64(h ^ (lo as u64));
    splitmix64(h ^ (hi as u64))
}

/// Bernoulli(p) indicator for an unordered pair, deterministic in
/// `(seed, {u, v})`.
#[inline]
pub fn pair_bernoulli(seed: u64, u: usize, v: usize, p: f64) -> bool {
    // Map the hash to [0, 1); p = 1.0 accepts everything, p = 0.0 nothing.
    let x = (pair_hash(seed, u, v) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    x < p
}

/// Seeded stream generator for sampling steps that are not pair-indexed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a label,
/// so one caller-facing seed can feed several internal sampling stages.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(seed ^ 0x6C62_272E_07BB_0142) ^ label)
}

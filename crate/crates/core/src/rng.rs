//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`SimRng`], ChaCha with 8 rounds
//! (`rand_chacha::ChaCha8Rng`). Its output stream is specified bit-for-bit, so
//! a seed reproduces the same draws on every platform. Normal variates use the
//! ziggurat sampler from `rand_distr`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform variate on the open interval (0, 1) built from the top 53 bits.
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Stable 64-bit FNV-1a hash, used to derive per-item seeds from labels.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Mix a base seed with a label and an index (splitmix64 finaliser).
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut z = base ^ fnv1a(label.as_bytes()) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Deterministic seed derivation.
//!
//! All randomness flows from one root seed; subsystems (data generation,
//! parameter init, batching, noise) each derive a labeled child seed so
//! that adding a consumer never shifts another's stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a named subsystem.
pub fn derive(root: u64, label: &str) -> u64 {
    splitmix64(root ^ fnv1a64(label.as_bytes()))
}

/// Child seed for the `index`-th member of a named family (per level, per sweep point, ...).
pub fn derive_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(root, label) ^ splitmix64(index))
}

/// Seeded, platform-independent RNG for a named subsystem.
pub fn rng(root: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive(root, label))
}

/// Seeded RNG for an indexed member of a named family.
pub fn rng_indexed(root: u64, label: &str, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_indexed(root, label, index))
}

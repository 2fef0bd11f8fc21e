//! Seeded random streams.
//!
//! Every phase of a run draws from its own ChaCha stream derived from one
//! master seed, so adding draws to one phase never shifts another.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

/// FNV-1a over the label; stable across platforms and releases.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Generator for the phase `label` under `seed`.
pub fn stream(seed: u64, label: &str) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}

/// Plain generator seeded directly.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

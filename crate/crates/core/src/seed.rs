//! Deterministic seed derivation.
//!
//! Every stochastic stage draws from its own generator, seeded from the run's
//! root seed and a stage label, so adding draws to one stage never shifts the
//! stream seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Mix a root seed with a stage label (FNV-1a over the label, then splitmix64).
pub fn derive(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

pub fn rng(root: u64, stage: &str) -> Rng {
    Rng::seed_from_u64(derive(root, stage))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

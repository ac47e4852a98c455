//! Named random sub-streams derived from one root seed.
//!
//! Every stage asks for its own stream by `(purpose, index...)`, so any stage
//! can be re-run on its own and parallel work (trees, clients, vehicles) gets
//! the same stream regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed, a purpose label and indices.
pub fn derive(seed: u64, purpose: &str, indices: &[u64]) -> u64 {
    // FNV-1a over the label keeps the mapping stable across builds.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut state = splitmix64(seed ^ h);
    for &i in indices {
        state = splitmix64(state ^ i.wrapping_mul(0x2545_F491_4F6C_DD1D));
    }
    state
}

pub fn rng(seed: u64, purpose: &str, indices: &[u64]) -> StageRng {
    StageRng::seed_from_u64(derive(seed, purpose, indices))
}

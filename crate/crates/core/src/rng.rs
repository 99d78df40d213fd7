//! Deterministic random streams.
//!
//! Every unit of parallel work gets its own ChaCha stream keyed by the master
//! seed plus a tuple of counters, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of tags into a new 64-bit seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc ^ splitmix64(t))
    })
}

/// Generator for `tags` under `master`.
pub fn stream(master: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, tags))
}

/// Stream used by SMC proposal attempt `attempt` of generation `generation`.
pub fn attempt_stream(master: u64, generation: u64, attempt: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(derive_seed(master, &[0x5eed_0001, generation]));
    rng.set_stream(attempt);
    rng
}

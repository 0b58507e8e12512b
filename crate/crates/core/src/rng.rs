//! Per-replica random streams: one ChaCha8 key from the user seed, one
//! stream id per replica, so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// A derived `u64` seed for APIs that take a seed rather than a generator.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    replica_rng(seed, replica).random()
}

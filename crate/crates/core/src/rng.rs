//! Seeded random streams.
//!
//! Every stochastic component draws from its own named sub-stream of one
//! root seed, so adding draws to one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// FNV-1a, used to turn a stream name into a ChaCha stream id.
fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for `(seed, name)`. Distinct names give independent streams.
pub fn substream(seed: u64, name: &str) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

/// Generator for replication `index` of a run seeded with `seed`.
pub fn replication_stream(seed: u64, name: &str, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(fnv1a(name) ^ index);
    rng
}

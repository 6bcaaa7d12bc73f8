//! Named random sub-streams derived from a single master seed.
//!
//! Each consumer of randomness (corpus sampling, splitting, the random
//! selection baseline, ...) draws from its own ChaCha stream, so adding draws
//! in one place never shifts the values seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_CORPUS: &str = "corpus";
pub const STREAM_SPLIT: &str = "split";
pub const STREAM_DEV: &str = "dev";
pub const STREAM_EM_INIT: &str = "em-init";
pub const STREAM_RANDOM_BASELINE: &str = "random-baseline";

/// FNV-1a, used only to turn stream names into stream ids.
fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn substream(master_seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(fnv1a(name));
    rng
}

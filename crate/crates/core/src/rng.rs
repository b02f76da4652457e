//! Seeded random streams.
//!
//! Every stochastic consumer gets its own ChaCha stream derived from the run
//! seed, so enabling one subsystem never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const ENV: u64 = 1;
pub const EXPLORATION: u64 = 2;
pub const REPLAY: u64 = 3;
pub const CURIOSITY: u64 = 4;
pub const BANDIT: u64 = 5;
/// Agent `k` initializes its network from stream `AGENT_INIT + k`.
pub const AGENT_INIT: u64 = 16;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a base seed with a tag (splitmix64), e.g. to give each training episode its own seed.
pub fn derive(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose key is
//! a 64-bit seed and whose stream id is one of the [`Stream`] tags. Position
//! within a stream is the ChaCha block counter, so two consumers that share a
//! seed but not a stream never see correlated output. Hierarchical seeds
//! (environment `e`, replicate `r`, ...) are derived with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Environment = 1,
    Fiber = 2,
    Coincidence = 3,
    MaxMass = 4,
    Classical = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a path of labels into a child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

//! Index-derived random substreams.
//!
//! Every stochastic cell of the pipeline (a repetition, a shuffle batch, a
//! library/test/source comparison) owns a generator seeded from its index
//! path, so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a base seed with an index path into a new seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &idx| splitmix64(acc ^ splitmix64(idx.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn substream(base: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, path))
}

pub fn from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Draws a base seed from a caller-supplied generator.
pub fn base_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

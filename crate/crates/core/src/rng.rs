//! Seeded random streams. Every stochastic routine takes its generator from
//! here so that a run is a pure function of its seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream identifiers, one namespace per consumer.
pub mod streams {
    pub const GENERATE: u64 = 1;
    pub const INIT_TOPICS: u64 = 2;
    /// Baseline streams are `BASELINE + transcript index`.
    pub const BASELINE: u64 = 2 << 32;
    /// Inference streams are `INFERENCE_BASE + transcript index`.
    pub const INFERENCE_BASE: u64 = 1 << 32;
    pub const INFERENCE_GLOBAL: u64 = (1 << 32) - 1;
}

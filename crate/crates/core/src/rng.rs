//! Reproducible random streams for batched simulation.
//!
//! ChaCha is a counter-based generator: a 64-bit key (the run seed) and a
//! 64-bit stream id (the batch index) select an independent keystream, so
//! any batch can be regenerated without touching the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

//! Seeded random streams.
//!
//! Every simulation stream is a ChaCha8 generator keyed by the user seed with
//! the worker index as its stream id, so results depend only on
//! `(seed, worker)` and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent generator for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

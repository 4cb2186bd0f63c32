//! Seeded, splittable random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Root stream for a seed.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` derived from `seed`.
///
/// Streams with different indices never overlap, so batches (restarts,
/// trials, probe sets) can run in any order or in parallel and still
/// reproduce the same numbers.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

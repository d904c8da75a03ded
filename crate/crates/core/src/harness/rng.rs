//! Named, seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Independent stream `name` under `seed`; the same pair always yields the same sequence.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

/// Stream `index` of family `name`, e.g. one per episode.
pub fn indexed_stream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(fnv1a(name));
    rng
}

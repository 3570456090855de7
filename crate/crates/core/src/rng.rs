//! Order-independent random streams.
//!
//! Every independent unit of work (bootstrap replicate, simulated SNP, ...)
//! gets its own ChaCha stream keyed by the run seed and a tuple of indices, so
//! results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a key tuple to a single stream id.
pub fn stream_id(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Generator for stream `keys` under `seed`.
pub fn keyed_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(keys));
    rng
}

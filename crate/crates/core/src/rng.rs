//! Labelled random streams.
//!
//! Every consumer of randomness asks for a stream by `(seed, label, index)`.
//! The stream is a ChaCha8 keystream keyed by the seed with the stream id
//! derived from the label and index, so results never depend on the order in
//! which streams are created or on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8], mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Stream id for a label/index pair.
pub fn stream_id(label: &str, index: u64) -> u64 {
    let h = fnv1a(label.as_bytes(), FNV_OFFSET);
    fnv1a(&index.to_le_bytes(), h)
}

/// Independent generator for `(seed, label, index)`.
pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(label, index));
    rng
}

/// Derive a child seed, e.g. for per-cell sweep runs or refine batches.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, label, index).next_u64()
}

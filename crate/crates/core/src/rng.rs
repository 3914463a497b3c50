//! Deterministic RNG stream derivation.
//!
//! Every random quantity in a replicated experiment is drawn from a stream
//! keyed by `(seed, path...)`, so results never depend on the order in which
//! parallel workers pick up work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from a base seed and an index path.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut state = seed;
    let mut mixed = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xD6E8_FEB8_6659_FD93).rotate_left(17);
        mixed = splitmix64(&mut state) ^ mixed.rotate_left(23);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).wrapping_add(mixed).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Seeded RNG for a single run.
pub fn seeded(seed: u64) -> StreamRng {
    stream(seed, &[])
}

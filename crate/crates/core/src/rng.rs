//! Counter-based random streams.
//!
//! Every simulated path gets its own ChaCha8 generator keyed by
//! `(seed, i, j)`, so results do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent generator for the stream labelled `(seed, i, j)`.
pub fn stream(seed: u64, i: u64, j: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed);
    for (slot, word) in key.chunks_exact_mut(8).zip([i, j, 0x6d66_6c61_62u64, 1]) {
        state = splitmix64(state ^ splitmix64(word));
        slot.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(seed, labels…)`. The key is
//! derived with splitmix64 over the labels, and the last label also selects
//! the ChaCha stream id, so sibling streams never share a keystream. Work that
//! is split across threads derives its own stream up front and therefore
//! draws the same numbers regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a string tag into a stream label.
pub fn label(tag: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn stream(seed: u64, labels: &[u64]) -> StreamRng {
    let mut state = seed ^ 0x6A09_E667_F3BC_C909;
    for &l in labels {
        state ^= l;
        splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(labels.last().copied().unwrap_or(0));
    rng
}

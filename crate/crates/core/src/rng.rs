//! Keyed random streams.
//!
//! Every stream is a ChaCha20 keystream addressed by `(seed, tag, lane)` for
//! the key and the realization index for the stream id, so a draw is a pure
//! function of its coordinates and never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Identifies one realization of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RealizationKey {
    pub seed: u64,
    pub index: u64,
}

impl RealizationKey {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }
}

/// What a stream is used for. Distinct tags give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Medium = 1,
    Noise = 2,
    Retrieval = 3,
    Test = 99,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `(key, tag, lane)`; `lane` separates sub-streams such as
/// sensor columns of a noise matrix.
pub fn stream(key: RealizationKey, tag: StreamTag, lane: u64) -> ChaCha20Rng {
    let mut seed = [0u8; 32];
    let mut state = splitmix64(key.seed ^ splitmix64(tag as u64));
    state = splitmix64(state ^ splitmix64(lane.wrapping_add(0x5851_F42D_4C95_7F2D)));
    for chunk in seed.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha20Rng::from_seed(seed);
    rng.set_stream(key.index);
    rng
}

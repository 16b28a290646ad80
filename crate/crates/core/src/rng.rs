//! Counter-based random streams keyed by (master seed, trial, purpose, index).
//!
//! Every stream is a ChaCha20 generator: the master seed picks the key, the
//! trial picks the 64-bit stream id and the purpose and substream index pick a
//! disjoint block range inside that stream. Each substream owns 2^36 blocks
//! (2^42 bytes), far more than any trial draws.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Payload,
    Noise,
    GeometryJitter,
    Bootstrap,
}

impl Purpose {
    fn tag(self) -> u128 {
        match self {
            Purpose::Payload => 1,
            Purpose::Noise => 2,
            Purpose::GeometryJitter => 3,
            Purpose::Bootstrap => 4,
        }
    }
}

const INDEX_SHIFT: u32 = 36;
const PURPOSE_SHIFT: u32 = 60;
const WORDS_PER_BLOCK: u128 = 16;

pub fn derive_rng_stream(master_seed: u64, trial_index: u64, purpose: Purpose) -> Stream {
    derive_substream(master_seed, trial_index, purpose, 0)
}

/// Stream for one site or link inside a trial.
pub fn derive_substream(master_seed: u64, trial_index: u64, purpose: Purpose, index: u32) -> Stream {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    let block = (purpose.tag() << PURPOSE_SHIFT) | ((index as u128) << INDEX_SHIFT);
    rng.set_word_pos(block * WORDS_PER_BLOCK);
    rng
}

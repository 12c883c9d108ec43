//! Seeded random streams.
//!
//! Every stream is a ChaCha20 generator keyed by `master ^ salt` (expanded with
//! `seed_from_u64`) and positioned on stream number `index`. Shots, drift
//! blocks and bootstrap resamples each get their own index, so results do not
//! depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

/// Per-purpose salts.
pub mod salt {
    pub const SHOT: u64 = 0x5348_4f54_0000_0001;
    pub const DRIFT: u64 = 0x4452_4946_0000_0002;
    pub const BOOTSTRAP: u64 = 0x424f_4f54_0000_0003;
    pub const ORACLE: u64 = 0x4f52_4143_0000_0004;
    pub const PAIR: u64 = 0x5041_4952_0000_0005;
}

/// Independent stream for `(master, salt, index)`.
pub fn stream(master: u64, salt: u64, index: u64) -> Stream {
    let mut rng = ChaCha20Rng::seed_from_u64(master ^ salt);
    rng.set_stream(index);
    rng
}

/// Keyed generator from which indexed streams are cut without re-expanding
/// the seed. `family.get(i)` equals `stream(master, salt, i)`.
#[derive(Clone, Debug)]
pub struct StreamFamily {
    base: ChaCha20Rng,
}

impl StreamFamily {
    pub fn new(master: u64, salt: u64) -> Self {
        StreamFamily { base: ChaCha20Rng::seed_from_u64(master ^ salt) }
    }

    pub fn get(&self, index: u64) -> Stream {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}

//! Deterministic, splittable seeding.
//!
//! Every random draw in the crate comes from a [`Seed`]. A seed can be split
//! into labelled or indexed children; the derivation is a pure function of
//! the parent seed and the label, so the same `(seed, label)` pair always
//! produces the same stream regardless of call order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed(value)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Child seed for a named stream.
    pub fn derive(self, label: &str) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(fnv1a(label.as_bytes()))))
    }

    /// Child seed for an indexed stream (trial number, sweep point, ...).
    pub fn derive_index(self, index: u64) -> Seed {
        Seed(splitmix64(
            self.0.rotate_left(17) ^ splitmix64(index.wrapping_add(0x6a09_e667_f3bc_c909)),
        ))
    }

    pub fn rng(self) -> Rng {
        ChaCha20Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

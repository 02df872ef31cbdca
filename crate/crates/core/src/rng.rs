//! Seeded, splittable random streams.
//!
//! Every consumer draws from its own ChaCha stream selected by a purpose label
//! and an index, so e.g. test-point draws never shift when the number of source
//! draws changes.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// The generator handed to every sampling routine.
pub type StreamRng = ChaCha20Rng;

/// Master seed from which all sub-streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for `(label, index)`.
    pub fn stream(&self, label: &str, index: u64) -> StreamRng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(mix(fnv1a(label.as_bytes()) ^ mix(index)));
        rng
    }

    /// Child seed for `(label, index)`, for nesting campaigns inside trials.
    pub fn child(&self, label: &str, index: u64) -> SeedStream {
        SeedStream::new(mix(self.seed ^ mix(fnv1a(label.as_bytes()) ^ mix(index))))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Deterministic random streams.
//!
//! Every source of randomness in the crate flows from a [`StreamSeed`]. A seed
//! can spawn labeled or indexed children without mutating the parent, so
//! parallel workers get independent streams whose contents do not depend on
//! scheduling. Identical seeds produce bit-identical runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A pure value from which random generators are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed(u64);

// SplitMix64 finalizer; decorrelates sequential child tags.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl StreamSeed {
    pub fn new(seed: u64) -> Self {
        StreamSeed(mix(seed))
    }

    /// Child stream for a named purpose ("cov", "mle", "eval", ...).
    pub fn labeled(&self, label: &str) -> Self {
        StreamSeed(mix(self.0 ^ fnv1a(label)))
    }

    /// Child stream for an indexed unit of work (iteration, sample, ...).
    pub fn child(&self, index: u64) -> Self {
        StreamSeed(mix(self.0 ^ mix(index.wrapping_add(0x51ed_270b))))
    }

    /// Instantiate the generator for this seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

//! Seeded, stream-splittable randomness.
//!
//! Every random draw in the pipeline comes from a [`SeededRng`]. A stream is
//! identified by `(seed, stream_id)`; child streams are derived by hashing a
//! purpose tag into a new stream id, so independent workers never share state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine two words into one well-mixed word. Not commutative.
pub fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b).rotate_left(17))
}

/// FNV-1a over the tag bytes, then mixed.
pub fn hash_tag(tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(h)
}

/// Derive a seed from a master seed and an ordered list of key parts.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    parts
        .iter()
        .fold(mix64(master), |acc, part| combine(acc, hash_tag(part)))
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream keyed by this stream's identity and `tag`. Does not
    /// consume any draws from `self`.
    pub fn derive(&self, tag: &str) -> SeededRng {
        SeededRng::new(self.seed, combine(self.stream_id, hash_tag(tag)))
    }

    /// Like [`derive`](Self::derive) with an integer index (restarts, attributes).
    pub fn derive_indexed(&self, tag: &str, index: u64) -> SeededRng {
        SeededRng::new(
            self.seed,
            combine(combine(self.stream_id, hash_tag(tag)), index),
        )
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

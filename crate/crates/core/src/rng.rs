//! Keyed random streams.
//!
//! Every stochastic component draws from a [`StreamKey`] derived from the
//! identifiers of what it is working on (function, instance, seed, schedule,
//! phase, iteration). Two components that must agree, such as every schedule
//! receiving the same initial design, derive the same key; everything else
//! gets an independent stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamKey(u64);

/// Phase tags so that different consumers of one run never share a stream.
pub mod phase {
    pub const INSTANCE: u64 = 0x01;
    pub const DESIGN: u64 = 0x02;
    pub const RUN: u64 = 0x03;
    pub const GP_FIT: u64 = 0x04;
    pub const AF_SEARCH: u64 = 0x05;
    pub const SCHEDULE: u64 = 0x06;
    pub const FALLBACK: u64 = 0x07;
    pub const SPLIT: u64 = 0x08;
    pub const FOREST: u64 = 0x09;
    pub const BOOTSTRAP_CI: u64 = 0x0a;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamKey {
    pub const ROOT: StreamKey = StreamKey(0x005e_ed0f_a50c_1a7e);

    pub fn new(raw: u64) -> Self {
        StreamKey(splitmix64(raw))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Child key for `tag`. Not commutative: `k.derive(a).derive(b)` and
    /// `k.derive(b).derive(a)` differ.
    #[must_use]
    pub fn derive(self, tag: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

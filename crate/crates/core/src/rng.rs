//! Seeded random streams.
//!
//! Every [`Rng`] is a ChaCha8 generator keyed by a 64-bit seed. A seed owns a
//! family of independent substreams, one per [`Stream`] purpose, so drawing
//! shuffles never perturbs weight initialisation and vice versa. [`Rng::fork`]
//! derives a fresh seed (via SplitMix64) for nested components such as the
//! members of an ensemble or the individual runs of an experiment.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose of a substream. The discriminant is the ChaCha stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Root = 0,
    Init = 1,
    Shuffle = 2,
    Sampling = 3,
    Data = 4,
    Split = 5,
}

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: Stream,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, Stream::Root)
    }

    fn keyed(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream as u64);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    /// Fresh generator for `purpose` under the same seed. Independent of how
    /// much of `self` has been consumed.
    pub fn substream(&self, purpose: Stream) -> Rng {
        Self::keyed(self.seed, purpose)
    }

    /// Child seed family identified by `tag`.
    pub fn fork(&self, tag: u64) -> Rng {
        let mixed = splitmix64(self.seed ^ splitmix64(tag.wrapping_add((self.stream as u64) << 56)));
        Self::new(mixed)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

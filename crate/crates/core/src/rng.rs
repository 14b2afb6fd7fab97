//! Counter-based, splittable random streams.
//!
//! A [`SplitStream`] is a 64-bit key. Child streams are derived by hashing the
//! parent key with an index, and each key drives a ChaCha8 generator, so any
//! (chain, step) pair owns an independent stream that does not depend on the
//! order in which work is scheduled.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SplitStream {
    key: u64,
}

impl SplitStream {
    pub fn new(seed: u64) -> Self {
        SplitStream { key: mix64(seed ^ GOLDEN) }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Child stream `index` of this stream.
    pub fn substream(&self, index: u64) -> Self {
        let salted = mix64(index.wrapping_add(1).wrapping_mul(GOLDEN));
        SplitStream { key: mix64(self.key ^ salted).rotate_left(17) ^ salted }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }

    /// `dim` independent standard normal draws from a fresh generator.
    pub fn standard_normals(&self, dim: usize) -> DVector<f64> {
        standard_normals(&mut self.rng(), dim)
    }
}

pub fn standard_normals<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(rng)))
}

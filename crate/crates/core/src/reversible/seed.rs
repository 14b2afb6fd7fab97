use crate::rng::SplitStream;

const MUL: u64 = 6_364_136_223_846_793_005;
const INC: u64 = 1_442_695_040_888_963_407;

/// Inverse of an odd `a` modulo `2^64` by Newton iteration; each round
/// doubles the number of correct low bits.
const fn mod_inverse(a: u64) -> u64 {
    let mut x = a;
    let mut i = 0;
    while i < 6 {
        x = x.wrapping_mul(2u64.wrapping_sub(a.wrapping_mul(x)));
        i += 1;
    }
    x
}

const MUL_INV: u64 = mod_inverse(MUL);

/// State of the invertible seed sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedState(pub u64);

impl SeedState {
    /// The random stream owned by this seed.
    pub fn stream(self) -> SplitStream {
        SplitStream::new(self.0)
    }
}

/// `s' = MUL * s + INC (mod 2^64)`.
pub fn forward_seed(s: SeedState) -> SeedState {
    SeedState(s.0.wrapping_mul(MUL).wrapping_add(INC))
}

pub fn backward_seed(s: SeedState) -> SeedState {
    SeedState(s.0.wrapping_sub(INC).wrapping_mul(MUL_INV))
}

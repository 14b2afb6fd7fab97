//! Reversible DAIS: run the chain forward keeping only the final state, a
//! 64-bit seed and a small buffer, then reconstruct every earlier state by
//! running it backward.
//!
//! Noise for step `k` is regenerated from the seed `s_k` of an invertible
//! linear congruential generator. Leapfrog is inverted by negating the
//! momentum. Momentum damping `v = gamma v_hat` destroys about
//! `log2(1/gamma)` bits per coordinate; in fixed-point mode those bits are
//! pushed onto an [`InfoBuffer`] so the whole trajectory is reconstructed
//! bit for bit.

mod buffer;
mod chain;
mod cost;
mod fixed;
mod seed;

pub use buffer::InfoBuffer;
pub use chain::{
    initial_state, reversible_backward, reversible_forward, reversible_forward_from, ForwardRun,
    ReversibleMode, ReversibleState, SeedChainNoise,
};
pub use cost::{memory_report, MemoryReport};
pub use fixed::{quantize_gamma, FixedFormat, FixedPointState, QuantizedGamma};
pub use seed::{backward_seed, forward_seed, SeedState};

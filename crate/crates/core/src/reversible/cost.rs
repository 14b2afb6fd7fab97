use crate::error::{DaisError, Result};

use super::chain::ReversibleMode;
use super::fixed::quantize_gamma;

/// Storage and compute of a naive versus a reversible DAIS gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemoryReport {
    /// `B K d`: one `B`-bit number per parameter per step.
    pub naive_bits: f64,
    /// `log2(1/gamma) K d` with the damping actually used by `mode`.
    pub reversible_bits: f64,
    pub ratio: f64,
    /// Gradient evaluations of the forward pass; the naive and reversible
    /// schemes both need `K` of them.
    pub forward_gradients: usize,
    /// Gradient evaluations of the backward pass: `K` to invert the
    /// leapfrog steps.
    pub backward_gradients: usize,
    pub effective_gamma: f64,
}

pub fn memory_report(
    d: usize,
    k: usize,
    gamma: f64,
    precision_bits: u32,
    mode: ReversibleMode,
) -> Result<MemoryReport> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(DaisError::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if precision_bits == 0 {
        return Err(DaisError::invalid("precision must be positive"));
    }
    let (bits_per_coordinate, effective_gamma) = match mode {
        ReversibleMode::Float => ((1.0 / gamma).log2(), gamma),
        ReversibleMode::FixedPoint(_) => {
            let q = quantize_gamma(gamma)?;
            (q.bits_per_coordinate(), q.effective())
        }
    };
    let cells = (k * d) as f64;
    let naive_bits = precision_bits as f64 * cells;
    let reversible_bits = bits_per_coordinate * cells;
    Ok(MemoryReport {
        naive_bits,
        reversible_bits,
        ratio: reversible_bits / naive_bits,
        forward_gradients: k,
        backward_gradients: k,
        effective_gamma,
    })
}

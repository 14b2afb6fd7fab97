use nalgebra::DVector;

use crate::error::{DaisError, Result};

/// Signed 64-bit fixed point with `frac_bits` fractional bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedFormat {
    frac_bits: u32,
}

impl Default for FixedFormat {
    fn default() -> Self {
        FixedFormat { frac_bits: 48 }
    }
}

impl FixedFormat {
    pub fn new(frac_bits: u32) -> Result<Self> {
        if !(1..=62).contains(&frac_bits) {
            return Err(DaisError::invalid(format!("fractional bits must lie in 1..=62, got {frac_bits}")));
        }
        Ok(FixedFormat { frac_bits })
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    fn scale(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// Value of one unit in the last place.
    pub fn ulp(&self) -> f64 {
        1.0 / self.scale()
    }

    /// Round to nearest, ties to even.
    pub fn to_fixed(&self, x: f64) -> Result<i64> {
        let y = (x * self.scale()).round_ties_even();
        // 2^63 is exactly representable; anything at or beyond it overflows.
        if !y.is_finite() || y.abs() >= 9_223_372_036_854_775_808.0 {
            return Err(DaisError::FixedPointOverflow(format!(
                "{x} does not fit with {} fractional bits",
                self.frac_bits
            )));
        }
        Ok(y as i64)
    }

    pub fn to_float(&self, q: i64) -> f64 {
        q as f64 / self.scale()
    }

    pub fn vec_to_fixed(&self, x: &DVector<f64>) -> Result<Vec<i64>> {
        x.iter().map(|v| self.to_fixed(*v)).collect()
    }

    pub fn vec_to_float(&self, q: &[i64]) -> DVector<f64> {
        DVector::from_iterator(q.len(), q.iter().map(|v| self.to_float(*v)))
    }
}

/// Chain state in fixed point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPointState {
    pub theta: Vec<i64>,
    pub v: Vec<i64>,
    pub format: FixedFormat,
}

impl FixedPointState {
    pub fn from_float(theta: &DVector<f64>, v: &DVector<f64>, format: FixedFormat) -> Result<Self> {
        Ok(FixedPointState { theta: format.vec_to_fixed(theta)?, v: format.vec_to_fixed(v)?, format })
    }

    pub fn theta_f64(&self) -> DVector<f64> {
        self.format.vec_to_float(&self.theta)
    }

    pub fn v_f64(&self) -> DVector<f64> {
        self.format.vec_to_float(&self.v)
    }
}

const GAMMA_DENOMINATOR_BITS: u32 = 16;

/// Damping factor as the reduced fraction `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizedGamma {
    pub num: u32,
    pub den: u32,
}

impl QuantizedGamma {
    pub fn effective(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_identity(&self) -> bool {
        self.num == self.den
    }

    /// Bits destroyed per damped coordinate.
    pub fn bits_per_coordinate(&self) -> f64 {
        (self.den as f64 / self.num as f64).log2()
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `gamma` rounded down to a multiple of `2^-16`. Rounding down keeps the
/// stored bits per coordinate at or above `log2(1/gamma)`.
pub fn quantize_gamma(gamma: f64) -> Result<QuantizedGamma> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(DaisError::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let den = 1u32 << GAMMA_DENOMINATOR_BITS;
    let num = (gamma * den as f64).floor() as u32;
    if num == 0 {
        return Err(DaisError::Unsupported(format!(
            "gamma = {gamma} rounds to zero: full refreshment cannot be inverted, store the trajectory instead"
        )));
    }
    let g = gcd(num, den);
    Ok(QuantizedGamma { num: num / g, den: den / g })
}

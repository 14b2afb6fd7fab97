//! Annealing and step-size schedules.

use crate::error::{DaisError, Result};

/// Inverse temperatures `0 = beta_0 <= ... <= beta_K = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnealingSchedule {
    betas: Vec<f64>,
}

impl AnnealingSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(DaisError::invalid("schedule needs at least two temperatures"));
        }
        if betas[0] != 0.0 || *betas.last().unwrap() != 1.0 {
            return Err(DaisError::invalid("schedule must start at 0 and end at 1"));
        }
        if betas.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(DaisError::invalid("schedule must be non-decreasing"));
        }
        Ok(AnnealingSchedule { betas })
    }

    /// `beta_k = k / K`.
    pub fn linear(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(DaisError::invalid("K must be at least 1"));
        }
        let k = steps as f64;
        let mut betas: Vec<f64> = (0..=steps).map(|i| i as f64 / k).collect();
        betas[steps] = 1.0;
        Ok(AnnealingSchedule { betas })
    }

    /// Number of transitions `K`.
    pub fn steps(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.betas[k]
    }
}

/// Per-transition leapfrog step sizes `eta_1 ... eta_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSizeScheme {
    base: f64,
    exponent: f64,
    per_step: Vec<f64>,
}

impl StepSizeScheme {
    /// Constant step `eta = base * K^(-exponent)` for every transition.
    pub fn constant(base: f64, exponent: f64, steps: usize) -> Result<Self> {
        if !(base > 0.0) || !base.is_finite() {
            return Err(DaisError::invalid(format!("step-size base must be positive, got {base}")));
        }
        if !(exponent >= 0.0) || !exponent.is_finite() {
            return Err(DaisError::invalid(format!("step-size exponent must be >= 0, got {exponent}")));
        }
        if steps == 0 {
            return Err(DaisError::invalid("K must be at least 1"));
        }
        let eta = base * (steps as f64).powf(-exponent);
        Ok(StepSizeScheme { base, exponent, per_step: vec![eta; steps] })
    }

    /// `eta = 0.08 * (K / 10)^(-1/4)`: the step size tuned at `K = 10` and
    /// rescaled with the optimal full-batch exponent.
    pub fn tuned(steps: usize) -> Result<Self> {
        Self::constant(0.08 * 10f64.powf(0.25), 0.25, steps)
    }

    /// Step size `eta_ref` at `K = k_ref`, rescaled as `(K / k_ref)^(-c)`.
    pub fn anchored(eta_ref: f64, k_ref: usize, exponent: f64, steps: usize) -> Result<Self> {
        Self::constant(eta_ref * (k_ref as f64).powf(exponent), exponent, steps)
    }

    /// Arbitrary positive per-step sizes.
    pub fn from_steps(per_step: Vec<f64>) -> Result<Self> {
        if per_step.is_empty() {
            return Err(DaisError::invalid("need at least one step size"));
        }
        if per_step.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(DaisError::invalid("step sizes must be finite and non-negative"));
        }
        Ok(StepSizeScheme { base: f64::NAN, exponent: f64::NAN, per_step })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn steps(&self) -> usize {
        self.per_step.len()
    }

    /// Step size of transition `k` (1-based).
    pub fn eta(&self, k: usize) -> f64 {
        self.per_step[k - 1]
    }

    pub fn per_step(&self) -> &[f64] {
        &self.per_step
    }
}

pub(crate) fn check_lengths(schedule: &AnnealingSchedule, steps: &StepSizeScheme) -> Result<()> {
    if schedule.steps() != steps.steps() {
        return Err(DaisError::invalid(format!(
            "schedule has {} transitions but step-size scheme has {}",
            schedule.steps(),
            steps.steps()
        )));
    }
    Ok(())
}

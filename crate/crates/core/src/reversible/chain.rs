use nalgebra::DVector;

use crate::error::{DaisError, Result};
use crate::sampler::{leapfrog, refresh_with, ChainNoise, StreamNoise, TransitionConfig};
use crate::schedule::{check_lengths, AnnealingSchedule, StepSizeScheme};
use crate::target::AnnealedTarget;

use super::buffer::InfoBuffer;
use super::fixed::{quantize_gamma, FixedFormat, FixedPointState, QuantizedGamma};
use super::seed::{backward_seed, forward_seed, SeedState};

/// Arithmetic used by the reversible chain. Only fixed point is exactly
/// invertible; float mode reproduces the ordinary chain and lets the
/// round-off drift of a backward pass be measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReversibleMode {
    Float,
    FixedPoint(FixedFormat),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReversibleState {
    Float { theta: DVector<f64>, v: DVector<f64> },
    Fixed(FixedPointState),
}

impl ReversibleState {
    pub fn theta_f64(&self) -> DVector<f64> {
        match self {
            ReversibleState::Float { theta, .. } => theta.clone(),
            ReversibleState::Fixed(s) => s.theta_f64(),
        }
    }

    pub fn v_f64(&self) -> DVector<f64> {
        match self {
            ReversibleState::Float { v, .. } => v.clone(),
            ReversibleState::Fixed(s) => s.v_f64(),
        }
    }
}

/// Everything a forward pass leaves behind.
#[derive(Clone, Debug)]
pub struct ForwardRun {
    pub state: ReversibleState,
    pub seed: SeedState,
    pub buffer: InfoBuffer,
    pub bound: f64,
    /// The damping actually applied (quantised in fixed-point mode).
    pub effective_gamma: f64,
}

/// Chain noise keyed by the seed sequence: the initial state comes from
/// `s_0` and refreshment `k` from `s_k = forward_seed^k(s_0)`. Feeding this
/// to [`crate::dais_chain_with_noise`] reproduces a float-mode forward pass.
#[derive(Clone, Copy, Debug)]
pub struct SeedChainNoise {
    start: SeedState,
    current: SeedState,
    step: usize,
}

impl SeedChainNoise {
    pub fn new(s0: SeedState) -> Self {
        SeedChainNoise { start: s0, current: s0, step: 0 }
    }
}

impl ChainNoise for SeedChainNoise {
    fn initial_state(
        &mut self,
        target: &dyn AnnealedTarget,
        config: &TransitionConfig,
    ) -> (DVector<f64>, DVector<f64>) {
        StreamNoise::new(self.start.stream()).initial_state(target, config)
    }

    fn refresh_normals(&mut self, step: usize, dim: usize) -> DVector<f64> {
        while self.step < step {
            self.current = forward_seed(self.current);
            self.step += 1;
        }
        self.current.stream().standard_normals(dim)
    }
}

/// `theta_0 ~ p_0` and `v_0 ~ N(0, M)` drawn from the stream of `s0`.
pub fn initial_state(
    target: &dyn AnnealedTarget,
    config: &TransitionConfig,
    s0: SeedState,
    mode: ReversibleMode,
) -> Result<ReversibleState> {
    let (theta, v) = SeedChainNoise::new(s0).initial_state(target, config);
    Ok(match mode {
        ReversibleMode::Float => ReversibleState::Float { theta, v },
        ReversibleMode::FixedPoint(f) => ReversibleState::Fixed(FixedPointState::from_float(&theta, &v, f)?),
    })
}

/// Samples the initial state from `s0` and runs the chain forward.
pub fn reversible_forward(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    s0: SeedState,
    mode: ReversibleMode,
    cap_bytes: Option<usize>,
) -> Result<ForwardRun> {
    let init = initial_state(target, config, s0, mode)?;
    reversible_forward_from(target, schedule, steps, config, init, s0, cap_bytes)
}

fn check_inputs(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    state: &ReversibleState,
) -> Result<()> {
    check_lengths(schedule, steps)?;
    let d = target.dim();
    let (nt, nv) = match state {
        ReversibleState::Float { theta, v } => (theta.len(), v.len()),
        ReversibleState::Fixed(s) => (s.theta.len(), s.v.len()),
    };
    if config.dim() != d || nt != d || nv != d {
        return Err(DaisError::invalid("state, mass and target dimensions disagree"));
    }
    Ok(())
}

fn noise_scale(gamma: f64, config: &TransitionConfig) -> DVector<f64> {
    let s = (1.0 - gamma * gamma).sqrt();
    config.mass().map(|m| s * m.sqrt())
}

fn new_buffer(pages: usize, cap_bytes: Option<usize>) -> InfoBuffer {
    match cap_bytes {
        Some(cap) => InfoBuffer::with_cap(pages, cap),
        None => InfoBuffer::new(pages),
    }
}

fn at_step(k: usize) -> impl Fn(DaisError) -> DaisError {
    move |e| DaisError::AtStep { step: k, source: Box::new(e) }
}

/// Runs the chain forward from a given initial state and seed.
pub fn reversible_forward_from(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    init: ReversibleState,
    s0: SeedState,
    cap_bytes: Option<usize>,
) -> Result<ForwardRun> {
    check_inputs(target, schedule, steps, config, &init)?;
    let d = target.dim();
    let k_total = schedule.steps();
    let mut seed = s0;
    let mut bound = -target.log_p0(&init.theta_f64());

    let (state, buffer, effective_gamma) = match init {
        ReversibleState::Float { mut theta, mut v } => {
            for k in 1..=k_total {
                let (t, v_hat) =
                    leapfrog(&theta, &v, steps.eta(k), schedule.beta(k), target, config).map_err(at_step(k))?;
                bound += config.log_kinetic_density(&v_hat) - config.log_kinetic_density(&v);
                seed = forward_seed(seed);
                let z = seed.stream().standard_normals(d);
                v = refresh_with(&v_hat, config.gamma(), &z, config);
                theta = t;
            }
            (ReversibleState::Float { theta, v }, new_buffer(0, cap_bytes), config.gamma())
        }
        ReversibleState::Fixed(mut s) => {
            let q = quantize_gamma(config.gamma())?;
            let scale = noise_scale(q.effective(), config);
            let mut buffer = new_buffer(if q.is_identity() { 0 } else { d }, cap_bytes);
            let f = s.format;
            for k in 1..=k_total {
                let v_prev = s.v_f64();
                fixed_leapfrog(&mut s, steps.eta(k), schedule.beta(k), target, config).map_err(at_step(k))?;
                bound += config.log_kinetic_density(&s.v_f64()) - config.log_kinetic_density(&v_prev);
                seed = forward_seed(seed);
                let z = seed.stream().standard_normals(d);
                for i in 0..d {
                    let damped = damp(s.v[i], q, &mut buffer, i).map_err(at_step(k))?;
                    let fresh = f.to_fixed(scale[i] * z[i]).map_err(at_step(k))?;
                    s.v[i] = checked(damped.checked_add(fresh), k)?;
                }
            }
            (ReversibleState::Fixed(s), buffer, q.effective())
        }
    };
    bound += target.log_f(1.0, &state.theta_f64()).map_err(at_step(k_total))?;
    if !bound.is_finite() {
        return Err(DaisError::NonFinite { step: k_total, quantity: "bound" });
    }
    let mut buffer = buffer;
    buffer.set_tag(seed.0, k_total as u64);
    Ok(ForwardRun { state, seed, buffer, bound, effective_gamma })
}

/// Runs the chain backward from the output of a forward pass, consuming the
/// buffer, and returns the initial state and seed.
pub fn reversible_backward(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    state: ReversibleState,
    seed: SeedState,
    buffer: &mut InfoBuffer,
) -> Result<(ReversibleState, SeedState)> {
    check_inputs(target, schedule, steps, config, &state)?;
    let d = target.dim();
    let k_total = schedule.steps();
    if let Some((tag_seed, tag_steps)) = buffer.tag() {
        if tag_seed != seed.0 || tag_steps != k_total as u64 {
            return Err(DaisError::Corruption(format!(
                "seed mismatch: buffer was written at seed {tag_seed:#x} after {tag_steps} steps, \
                 backward pass starts at seed {:#x} with {k_total} steps",
                seed.0
            )));
        }
    }
    let mut seed = seed;
    let state = match state {
        ReversibleState::Float { mut theta, mut v } => {
            let gamma = config.gamma();
            if gamma == 0.0 {
                return Err(DaisError::Unsupported("full refreshment cannot be inverted".into()));
            }
            let scale = noise_scale(gamma, config);
            for k in (1..=k_total).rev() {
                let z = seed.stream().standard_normals(d);
                let v_hat = if gamma == 1.0 { v } else { (v - scale.component_mul(&z)) / gamma };
                seed = backward_seed(seed);
                let (t, back) =
                    leapfrog(&theta, &(-v_hat), steps.eta(k), schedule.beta(k), target, config).map_err(at_step(k))?;
                theta = t;
                v = -back;
            }
            ReversibleState::Float { theta, v }
        }
        ReversibleState::Fixed(mut s) => {
            let q = quantize_gamma(config.gamma())?;
            let scale = noise_scale(q.effective(), config);
            let expected_pages = if q.is_identity() { 0 } else { d };
            if buffer.page_count() != expected_pages {
                return Err(DaisError::Corruption(format!(
                    "buffer has {} pages, expected {expected_pages}",
                    buffer.page_count()
                )));
            }
            let f = s.format;
            for k in (1..=k_total).rev() {
                let z = seed.stream().standard_normals(d);
                for i in 0..d {
                    let fresh = f.to_fixed(scale[i] * z[i]).map_err(at_step(k))?;
                    let damped = checked(s.v[i].checked_sub(fresh), k)?;
                    s.v[i] = undamp(damped, q, buffer, i).map_err(at_step(k))?;
                }
                seed = backward_seed(seed);
                fixed_leapfrog_inverse(&mut s, steps.eta(k), schedule.beta(k), target, config)
                    .map_err(at_step(k))?;
            }
            if !buffer.is_empty() {
                return Err(DaisError::Corruption("buffer not fully consumed by the backward pass".into()));
            }
            ReversibleState::Fixed(s)
        }
    };
    Ok((state, seed))
}

fn checked(x: Option<i64>, step: usize) -> Result<i64> {
    x.ok_or_else(|| DaisError::FixedPointOverflow(format!("integer overflow at step {step}")))
}

fn overflow() -> DaisError {
    DaisError::FixedPointOverflow("integer overflow in leapfrog".into())
}

/// Rounded position increments `eta/2 * W v`.
fn drift(s: &FixedPointState, v: &[i64], eta: f64, config: &TransitionConfig) -> Result<Vec<i64>> {
    let f = s.format;
    v.iter()
        .zip(config.mass().iter())
        .map(|(vi, m)| f.to_fixed(0.5 * eta * f.to_float(*vi) / m))
        .collect()
}

/// Rounded momentum increments `eta * grad log f_beta(theta)`.
fn kick(s: &FixedPointState, eta: f64, beta: f64, target: &dyn AnnealedTarget) -> Result<Vec<i64>> {
    let theta = s.theta_f64();
    let g = target.grad_log_f(beta, &theta)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(DaisError::NonFiniteGradient { beta, theta_mid: theta.as_slice().to_vec() });
    }
    g.iter().map(|gi| s.format.to_fixed(eta * gi)).collect()
}

/// Leapfrog in integer arithmetic. Every increment is a function of a
/// quantity that is still available when undoing it, so subtracting the same
/// integers in reverse order inverts the step exactly.
fn fixed_leapfrog(
    s: &mut FixedPointState,
    eta: f64,
    beta: f64,
    target: &dyn AnnealedTarget,
    config: &TransitionConfig,
) -> Result<()> {
    let inc = drift(s, &s.v, eta, config)?;
    add(&mut s.theta, &inc)?;
    let inc = kick(s, eta, beta, target)?;
    add(&mut s.v, &inc)?;
    let inc = drift(s, &s.v, eta, config)?;
    add(&mut s.theta, &inc)
}

fn fixed_leapfrog_inverse(
    s: &mut FixedPointState,
    eta: f64,
    beta: f64,
    target: &dyn AnnealedTarget,
    config: &TransitionConfig,
) -> Result<()> {
    let inc = drift(s, &s.v, eta, config)?;
    sub(&mut s.theta, &inc)?;
    let inc = kick(s, eta, beta, target)?;
    sub(&mut s.v, &inc)?;
    let inc = drift(s, &s.v, eta, config)?;
    sub(&mut s.theta, &inc)
}

fn add(x: &mut [i64], inc: &[i64]) -> Result<()> {
    for (a, b) in x.iter_mut().zip(inc) {
        *a = a.checked_add(*b).ok_or_else(overflow)?;
    }
    Ok(())
}

fn sub(x: &mut [i64], inc: &[i64]) -> Result<()> {
    for (a, b) in x.iter_mut().zip(inc) {
        *a = a.checked_sub(*b).ok_or_else(overflow)?;
    }
    Ok(())
}

/// `x -> (num / den) x`, exactly invertible: the remainder of the division
/// by `den` is pushed, and the remainder needed to undo the multiplication by
/// `num` is popped.
fn damp(x: i64, q: QuantizedGamma, buffer: &mut InfoBuffer, page: usize) -> Result<i64> {
    if q.is_identity() {
        return Ok(x);
    }
    let (num, den) = (q.num as i64, q.den as i64);
    buffer.push(page, x.rem_euclid(den) as u32, q.den)?;
    let x1 = x.div_euclid(den);
    let r = if num == 1 { 0 } else { buffer.pop(page, q.num)? as i64 };
    x1.checked_mul(num).and_then(|y| y.checked_add(r)).ok_or_else(overflow)
}

fn undamp(x: i64, q: QuantizedGamma, buffer: &mut InfoBuffer, page: usize) -> Result<i64> {
    if q.is_identity() {
        return Ok(x);
    }
    let (num, den) = (q.num as i64, q.den as i64);
    let r = x.rem_euclid(num);
    let x1 = x.div_euclid(num);
    if num > 1 {
        buffer.push(page, r as u32, q.num)?;
    }
    let low = buffer.pop(page, q.den)? as i64;
    x1.checked_mul(den).and_then(|y| y.checked_add(low)).ok_or_else(overflow)
}

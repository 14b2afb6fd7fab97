//! The DAIS chain: one leapfrog step and one partial momentum refreshment
//! per intermediate distribution, with the running bound
//! `L = -log p_0(theta_0) + sum_k [log pi(v_hat_k) - log pi(v_{k-1})] + log f_1(theta_K)`.

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{DaisError, Result};
use crate::rng::{standard_normals, SplitStream};
use crate::schedule::{check_lengths, AnnealingSchedule, StepSizeScheme};
use crate::stats::{log_sum_exp, mean_stderr};
use crate::target::AnnealedTarget;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Damping `gamma` and diagonal mass matrix of the transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionConfig {
    gamma: f64,
    mass: DVector<f64>,
}

impl TransitionConfig {
    pub fn new(gamma: f64, mass: DVector<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(DaisError::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if mass.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(DaisError::invalid("mass entries must be positive and finite"));
        }
        Ok(TransitionConfig { gamma, mass })
    }

    /// Unit mass in `dim` dimensions.
    pub fn identity(gamma: f64, dim: usize) -> Result<Self> {
        Self::new(gamma, DVector::from_element(dim, 1.0))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// `log N(v; 0, M)`.
    pub fn log_kinetic_density(&self, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (vi, mi) in v.iter().zip(self.mass.iter()) {
            acc += vi * vi / mi + mi.ln() + LN_2PI;
        }
        -0.5 * acc
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(DaisError::invalid(format!(
                "mass has dimension {} but target has {dim}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Position, momentum, step index and running bound of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub theta: DVector<f64>,
    pub v: DVector<f64>,
    pub k: usize,
    pub bound_acc: f64,
}

/// Half drift, full kick at the midpoint, half drift.
pub fn leapfrog(
    theta: &DVector<f64>,
    v: &DVector<f64>,
    eta: f64,
    beta: f64,
    target: &dyn AnnealedTarget,
    config: &TransitionConfig,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(DaisError::invalid(format!("step size must be >= 0, got {eta}")));
    }
    if theta.len() != target.dim() || v.len() != target.dim() {
        return Err(DaisError::invalid("state length does not match target dimension"));
    }
    if eta == 0.0 {
        return Ok((theta.clone(), v.clone()));
    }
    let half = 0.5 * eta;
    let inv_mass = config.mass.map(|m| 1.0 / m);
    let theta_mid = theta + v.component_mul(&inv_mass) * half;
    let grad = target.grad_log_f(beta, &theta_mid)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(DaisError::NonFiniteGradient { beta, theta_mid: theta_mid.as_slice().to_vec() });
    }
    let v_hat = v + grad * eta;
    let theta_new = theta_mid + v_hat.component_mul(&inv_mass) * half;
    Ok((theta_new, v_hat))
}

/// `v = gamma * v_hat + sqrt(1 - gamma^2) * M^(1/2) z` for a given standard
/// normal vector `z`.
pub fn refresh_with(
    v_hat: &DVector<f64>,
    gamma: f64,
    z: &DVector<f64>,
    config: &TransitionConfig,
) -> DVector<f64> {
    if gamma == 1.0 {
        return v_hat.clone();
    }
    let scale = (1.0 - gamma * gamma).sqrt();
    let noise = z.zip_map(&config.mass, |zi, mi| zi * mi.sqrt());
    if gamma == 0.0 {
        return noise;
    }
    v_hat * gamma + noise * scale
}

/// Partial momentum refreshment with `eps ~ N(0, M)` drawn from `rng`.
pub fn refresh(
    v_hat: &DVector<f64>,
    gamma: f64,
    rng: &mut dyn RngCore,
    config: &TransitionConfig,
) -> DVector<f64> {
    let z = standard_normals(rng, v_hat.len());
    refresh_with(v_hat, gamma, &z, config)
}

/// Source of the randomness a chain consumes: the initial state and the
/// standard normals of every refreshment.
pub trait ChainNoise {
    /// Draws `theta_0 ~ p_0` and then `v_0 ~ N(0, M)`, in that order.
    fn initial_state(
        &mut self,
        target: &dyn AnnealedTarget,
        config: &TransitionConfig,
    ) -> (DVector<f64>, DVector<f64>);

    /// Standard normals for the refreshment after transition `step` (1-based).
    fn refresh_normals(&mut self, step: usize, dim: usize) -> DVector<f64>;
}

/// Chain noise from a [`SplitStream`]: substream 0 initialises the chain and
/// substream `k` feeds refreshment `k`.
#[derive(Clone, Copy, Debug)]
pub struct StreamNoise {
    stream: SplitStream,
}

impl StreamNoise {
    pub fn new(stream: SplitStream) -> Self {
        StreamNoise { stream }
    }
}

impl ChainNoise for StreamNoise {
    fn initial_state(
        &mut self,
        target: &dyn AnnealedTarget,
        config: &TransitionConfig,
    ) -> (DVector<f64>, DVector<f64>) {
        let mut rng = self.stream.substream(0).rng();
        let theta = target.sample_p0(&mut rng);
        let z = standard_normals(&mut rng, target.dim());
        (theta, z.zip_map(config.mass(), |zi, mi| zi * mi.sqrt()))
    }

    fn refresh_normals(&mut self, step: usize, dim: usize) -> DVector<f64> {
        self.stream.substream(step as u64).standard_normals(dim)
    }
}

fn check_chain_inputs(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
) -> Result<()> {
    check_lengths(schedule, steps)?;
    config.check_dim(target.dim())
}

/// Runs one DAIS chain with the given noise source and returns the final
/// state and the single-sample bound `L`.
pub fn dais_chain_with_noise(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    noise: &mut dyn ChainNoise,
) -> Result<(ChainState, f64)> {
    check_chain_inputs(target, schedule, steps, config)?;
    let dim = target.dim();
    let (mut theta, mut v) = noise.initial_state(target, config);
    let mut bound = -target.log_p0(&theta);
    if !bound.is_finite() {
        return Err(DaisError::NonFinite { step: 0, quantity: "log p_0(theta_0)" });
    }
    for k in 1..=schedule.steps() {
        let (theta_new, v_hat) = leapfrog(&theta, &v, steps.eta(k), schedule.beta(k), target, config)
            .map_err(|e| DaisError::AtStep { step: k, source: Box::new(e) })?;
        bound += config.log_kinetic_density(&v_hat) - config.log_kinetic_density(&v);
        if !bound.is_finite() {
            return Err(DaisError::NonFinite { step: k, quantity: "bound" });
        }
        let z = noise.refresh_normals(k, dim);
        v = refresh_with(&v_hat, config.gamma(), &z, config);
        theta = theta_new;
    }
    let k = schedule.steps();
    bound += target
        .log_f(1.0, &theta)
        .map_err(|e| DaisError::AtStep { step: k, source: Box::new(e) })?;
    if !bound.is_finite() {
        return Err(DaisError::NonFinite { step: k, quantity: "bound" });
    }
    Ok((ChainState { theta, v, k, bound_acc: bound }, bound))
}

/// One DAIS chain driven by `stream`.
pub fn dais_chain(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    stream: SplitStream,
) -> Result<(ChainState, f64)> {
    dais_chain_with_noise(target, schedule, steps, config, &mut StreamNoise::new(stream))
}

/// Runs `chains` independent chains in parallel; chain `i` uses
/// `stream.substream(i)`, so the output does not depend on scheduling.
pub fn dais_chain_values(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    chains: usize,
    stream: SplitStream,
) -> Result<Vec<f64>> {
    check_chain_inputs(target, schedule, steps, config)?;
    let results: Vec<Result<f64>> = (0..chains)
        .into_par_iter()
        .map(|i| {
            let chain_stream = stream.substream(i as u64);
            let forked = target.fork(chain_stream.substream(u64::MAX));
            let t: &dyn AnnealedTarget = forked.as_deref().unwrap_or(target);
            dais_chain(t, schedule, steps, config, chain_stream)
                .map(|(_, bound)| bound)
                .map_err(|e| DaisError::Chain { chain: i, source: Box::new(e) })
        })
        .collect();
    results.into_iter().collect()
}

/// Monte Carlo summary of the bound over independent chains.
#[derive(Clone, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub values: Vec<f64>,
}

pub fn dais_bound_mc(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    chains: usize,
    stream: SplitStream,
) -> Result<McEstimate> {
    if chains < 2 {
        return Err(DaisError::invalid("need at least two chains for a standard error"));
    }
    let values = dais_chain_values(target, schedule, steps, config, chains, stream)?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(McEstimate { mean, stderr, values })
}

/// `log((1/S) sum_i exp(w_i))`, computed with a max shift.
pub fn iw_combine(log_weights: &[f64]) -> Result<f64> {
    if log_weights.is_empty() {
        return Err(DaisError::invalid("no log-weights to combine"));
    }
    if log_weights.iter().any(|w| !w.is_finite()) {
        return Err(DaisError::invalid("log-weights must be finite"));
    }
    Ok(log_sum_exp(log_weights) - (log_weights.len() as f64).ln())
}

/// Result of one MH-corrected AIS chain.
#[derive(Clone, Debug)]
pub struct AisRun {
    pub theta: DVector<f64>,
    pub log_weight: f64,
    pub accept_rate: f64,
}

/// AIS baseline: at each temperature, accumulate the weight increment and
/// then apply an HMC transition (`leapfrog_steps` leapfrog steps, MH test on
/// the extended Hamiltonian, momentum negated on rejection, then partial
/// refreshment).
pub fn ais_mh_chain(
    target: &dyn AnnealedTarget,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    leapfrog_steps: usize,
    stream: SplitStream,
) -> Result<AisRun> {
    check_chain_inputs(target, schedule, steps, config)?;
    if leapfrog_steps == 0 {
        return Err(DaisError::invalid("need at least one leapfrog step per transition"));
    }
    let dim = target.dim();
    let (mut theta, mut v) = StreamNoise::new(stream).initial_state(target, config);
    let mut log_weight = 0.0;
    let mut accepted = 0usize;
    let wrap = |k: usize| move |e: DaisError| DaisError::AtStep { step: k, source: Box::new(e) };

    for k in 1..=schedule.steps() {
        let beta = schedule.beta(k);
        let prev = schedule.beta(k - 1);
        log_weight += target.log_f(beta, &theta).map_err(wrap(k))?
            - target.log_f(prev, &theta).map_err(wrap(k))?;
        if !log_weight.is_finite() {
            return Err(DaisError::NonFinite { step: k, quantity: "log weight" });
        }

        let kinetic = |v: &DVector<f64>| -config.log_kinetic_density(v);
        let h0 = -target.log_f(beta, &theta).map_err(wrap(k))? + kinetic(&v);
        let (mut prop_theta, mut prop_v) = (theta.clone(), v.clone());
        for _ in 0..leapfrog_steps {
            (prop_theta, prop_v) =
                leapfrog(&prop_theta, &prop_v, steps.eta(k), beta, target, config).map_err(wrap(k))?;
        }
        let h1 = -target.log_f(beta, &prop_theta).map_err(wrap(k))? + kinetic(&prop_v);

        let mut rng = stream.substream(k as u64).rng();
        let u: f64 = rng.random();
        if h1.is_finite() && u.ln() < h0 - h1 {
            theta = prop_theta;
            v = prop_v;
            accepted += 1;
        } else {
            v = -v;
        }
        let z = standard_normals(&mut rng, dim);
        v = refresh_with(&v, config.gamma(), &z, config);
    }
    Ok(AisRun { theta, log_weight, accept_rate: accepted as f64 / schedule.steps() as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{geometric_target, FlatLikelihood, GaussianPrior, LogLikelihood};
    use nalgebra::dvector;
    use proptest::prelude::*;

    /// Non-Gaussian likelihood so leapfrog is genuinely nonlinear.
    struct Bumpy;
    impl LogLikelihood for Bumpy {
        fn dim(&self) -> usize {
            3
        }
        fn log_likelihood(&self, t: &DVector<f64>) -> f64 {
            -(t[0] - 1.0).powi(2) - 0.1 * t[1].powi(4) + (t[2] * t[0]).cos()
        }
        fn grad_log_likelihood(&self, t: &DVector<f64>) -> DVector<f64> {
            let s = (t[2] * t[0]).sin();
            dvector![-2.0 * (t[0] - 1.0) - t[2] * s, -0.4 * t[1].powi(3), -t[0] * s]
        }
    }

    fn bumpy() -> impl AnnealedTarget {
        geometric_target(GaussianPrior::standard(3), Bumpy).unwrap()
    }

    fn flat(dim: usize) -> impl AnnealedTarget {
        geometric_target(GaussianPrior::standard(dim), FlatLikelihood { dim }).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let t = bumpy();
        let cfg = TransitionConfig::identity(0.5, 3).unwrap();
        let theta = dvector![0.1, 0.2, 0.3];
        let v = dvector![1.0, -1.0, 0.5];
        let (a, b) = leapfrog(&theta, &v, 0.0, 0.5, &t, &cfg).unwrap();
        assert_eq!(a, theta);
        assert_eq!(b, v);
    }

    proptest! {
        #[test]
        fn leapfrog_is_time_reversible(
            th in proptest::collection::vec(-2.0f64..2.0, 3),
            vv in proptest::collection::vec(-2.0f64..2.0, 3),
            eta in 0.001f64..0.3,
            beta in 0.0f64..=1.0,
            m in proptest::collection::vec(0.5f64..2.0, 3),
        ) {
            let t = bumpy();
            let cfg = TransitionConfig::new(0.9, DVector::from_vec(m)).unwrap();
            let theta = DVector::from_vec(th);
            let v = DVector::from_vec(vv);
            let (t1, v1) = leapfrog(&theta, &v, eta, beta, &t, &cfg).unwrap();
            let (t2, v2) = leapfrog(&t1, &(-v1), eta, beta, &t, &cfg).unwrap();
            let v2 = -v2;
            let scale = 1.0 + theta.amax().max(v.amax());
            prop_assert!((t2 - &theta).amax() <= 1e-10 * scale);
            prop_assert!((v2 - &v).amax() <= 1e-10 * scale);
        }

        #[test]
        fn iw_combine_is_bounded_by_its_inputs(ws in proptest::collection::vec(-50.0f64..50.0, 1..20)) {
            let c = iw_combine(&ws).unwrap();
            let max = ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = ws.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(c <= max + 1e-12 && c >= min - 1e-12);
            let mut doubled = ws.clone();
            doubled.extend_from_slice(&ws);
            prop_assert!((iw_combine(&doubled).unwrap() - c).abs() < 1e-12);
            // Adding one sample moves the estimate by no more than that
            // sample's distance from the current estimate.
            let extra = ws[0] + 3.0;
            let mut more = ws.clone();
            more.push(extra);
            prop_assert!((iw_combine(&more).unwrap() - c).abs() <= (extra - c).abs() + 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_is_reported_with_midpoint() {
        struct Blowup;
        impl LogLikelihood for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn log_likelihood(&self, _: &DVector<f64>) -> f64 {
                0.0
            }
            fn grad_log_likelihood(&self, _: &DVector<f64>) -> DVector<f64> {
                dvector![f64::NAN]
            }
        }
        let t = geometric_target(GaussianPrior::standard(1), Blowup).unwrap();
        let cfg = TransitionConfig::identity(0.0, 1).unwrap();
        let err = leapfrog(&dvector![0.0], &dvector![2.0], 0.5, 0.5, &t, &cfg).unwrap_err();
        match err {
            DaisError::NonFiniteGradient { theta_mid, .. } => assert_eq!(theta_mid, vec![0.5]),
            other => panic!("unexpected {other}"),
        }
        let schedule = AnnealingSchedule::linear(3).unwrap();
        let steps = StepSizeScheme::constant(0.1, 0.0, 3).unwrap();
        let err = dais_chain(&t, &schedule, &steps, &cfg, SplitStream::new(0)).unwrap_err();
        assert!(matches!(err, DaisError::AtStep { step: 1, .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn refresh_endpoints() {
        let cfg = TransitionConfig::identity(1.0, 2).unwrap();
        let v_hat = dvector![0.3, -4.0];
        let mut rng = SplitStream::new(2).rng();
        assert_eq!(refresh(&v_hat, 1.0, &mut rng, &cfg), v_hat);
        let z = dvector![0.7, 0.1];
        assert_eq!(refresh_with(&v_hat, 0.0, &z, &cfg), z);
        let other = dvector![100.0, 100.0];
        assert_eq!(refresh_with(&other, 0.0, &z, &cfg), z);
    }

    #[test]
    fn refresh_preserves_the_momentum_law() {
        let cfg = TransitionConfig::new(0.0, dvector![0.5, 2.0]).unwrap();
        let n = 100_000;
        for gamma in [0.0, 0.5, 0.9, 1.0] {
            let mut rng = SplitStream::new(11).substream((gamma * 100.0) as u64).rng();
            let mut sum = DVector::zeros(2);
            let mut sq = DVector::zeros(2);
            let mut cross = 0.0;
            for _ in 0..n {
                let v_hat = standard_normals(&mut rng, 2).component_mul(&cfg.mass().map(f64::sqrt));
                let v = refresh(&v_hat, gamma, &mut rng, &cfg);
                sum += &v;
                sq += v.component_mul(&v);
                cross += v[0] * v[1];
            }
            let mean = &sum / n as f64;
            let var = &sq / n as f64 - mean.component_mul(&mean);
            for i in 0..2 {
                let m = cfg.mass()[i];
                assert!(mean[i].abs() < 3.0 * (m / n as f64).sqrt() + 1e-12, "gamma {gamma}");
                // Var of a sample variance of a Gaussian is 2 m^2 / n.
                assert!((var[i] - m).abs() < 3.0 * (2.0 * m * m / n as f64).sqrt(), "gamma {gamma}");
            }
            assert!((cross / n as f64).abs() < 3.0 * (1.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn zero_step_chain_reduces_to_importance_sampling() {
        let t = bumpy();
        let cfg = TransitionConfig::identity(0.0, 3).unwrap();
        let schedule = AnnealingSchedule::linear(1).unwrap();
        let steps = StepSizeScheme::from_steps(vec![0.0]).unwrap();
        let stream = SplitStream::new(4);
        let (state, l) = dais_chain(&t, &schedule, &steps, &cfg, stream).unwrap();
        let (theta0, _) = StreamNoise::new(stream).initial_state(&t, &cfg);
        assert_eq!(state.theta, theta0);
        let expected = t.log_f(1.0, &theta0).unwrap() - t.log_p0(&theta0);
        assert!((l - expected).abs() < 1e-12);
        assert_eq!(state.bound_acc, l);
    }

    #[test]
    fn prior_target_bound_is_centred_at_zero() {
        let t = flat(2);
        let cfg = TransitionConfig::identity(0.5, 2).unwrap();
        let schedule = AnnealingSchedule::linear(10).unwrap();
        let steps = StepSizeScheme::constant(0.3, 0.0, 10).unwrap();
        let est = dais_bound_mc(&t, &schedule, &steps, &cfg, 5000, SplitStream::new(8)).unwrap();
        assert!(est.mean.abs() < 3.0 * est.stderr, "{} +- {}", est.mean, est.stderr);
    }

    #[test]
    fn chains_use_distinct_substreams() {
        let t = bumpy();
        let cfg = TransitionConfig::identity(0.9, 3).unwrap();
        let schedule = AnnealingSchedule::linear(5).unwrap();
        let steps = StepSizeScheme::constant(0.2, 0.0, 5).unwrap();
        let root = SplitStream::new(1);
        let (a, _) = dais_chain(&t, &schedule, &steps, &cfg, root.substream(0)).unwrap();
        let (b, _) = dais_chain(&t, &schedule, &steps, &cfg, root.substream(1)).unwrap();
        assert_ne!(a.theta, b.theta);
        let est = dais_bound_mc(&t, &schedule, &steps, &cfg, 2, root).unwrap();
        assert_ne!(est.values[0], est.values[1]);
        assert!(dais_bound_mc(&t, &schedule, &steps, &cfg, 1, root).is_err());
        // Parallel execution is reproducible.
        let again = dais_bound_mc(&t, &schedule, &steps, &cfg, 2, root).unwrap();
        assert_eq!(est.values, again.values);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let t = bumpy();
        let cfg = TransitionConfig::identity(0.9, 2).unwrap();
        let schedule = AnnealingSchedule::linear(5).unwrap();
        let steps = StepSizeScheme::constant(0.2, 0.0, 5).unwrap();
        assert!(dais_chain(&t, &schedule, &steps, &cfg, SplitStream::new(0)).is_err());
        let cfg = TransitionConfig::identity(0.9, 3).unwrap();
        let steps = StepSizeScheme::constant(0.2, 0.0, 4).unwrap();
        assert!(dais_chain(&t, &schedule, &steps, &cfg, SplitStream::new(0)).is_err());
        assert!(TransitionConfig::identity(1.1, 3).is_err());
        assert!(TransitionConfig::new(0.5, dvector![1.0, 0.0]).is_err());
    }

    #[test]
    fn iw_combine_examples() {
        assert_eq!(iw_combine(&[1.7]).unwrap(), 1.7);
        assert!((iw_combine(&[-3.2, -3.2]).unwrap() + 3.2).abs() < 1e-15);
        assert!((iw_combine(&[0.0, 3f64.ln()]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(iw_combine(&[]).is_err());
        assert!(iw_combine(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn ais_on_prior_target_has_zero_weight() {
        let t = flat(3);
        let cfg = TransitionConfig::identity(0.5, 3).unwrap();
        let schedule = AnnealingSchedule::linear(20).unwrap();
        let steps = StepSizeScheme::constant(0.3, 0.0, 20).unwrap();
        let run = ais_mh_chain(&t, &schedule, &steps, &cfg, 1, SplitStream::new(3)).unwrap();
        assert_eq!(run.log_weight, 0.0);
        assert!(run.accept_rate > 0.0);
    }

    #[test]
    fn kinetic_density_uses_the_mass() {
        let cfg = TransitionConfig::new(0.0, dvector![4.0]).unwrap();
        let lp = cfg.log_kinetic_density(&dvector![2.0]);
        let expected = -0.5 * (1.0 + 4f64.ln() + LN_2PI);
        assert!((lp - expected).abs() < 1e-15);
    }
}

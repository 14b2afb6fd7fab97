//! Sampled chains checked against the exact Gaussian moment engine.

use dais::blr::{exact_log_ml, expected_bound, expected_kinetic_sum, propagate_moments, BlrModel};
use dais::harness::{gen_blr_data, tune_step_size};
use dais::rng::{standard_normals, SplitStream};
use dais::stats::mean_stderr;
use dais::{
    ais_mh_chain, dais_bound_mc, leapfrog, refresh, AnnealedTarget, AnnealingSchedule,
    StepSizeScheme, TransitionConfig,
};
use nalgebra::{dmatrix, dvector, DVector};

fn toy() -> BlrModel {
    BlrModel::new(dmatrix![1.0], dvector![1.0], 1.0, dvector![0.0], dmatrix![1.0]).unwrap()
}

fn small_model() -> BlrModel {
    let x = dmatrix![1.0, 0.5; -0.3, 1.2; 0.8, -0.7; 0.1, 0.4; -1.1, 0.2];
    let y = dvector![0.7, -1.2, 0.4, 2.0, -0.5];
    BlrModel::new(x, y, 0.5, dvector![0.2, -0.1], dmatrix![1.5, 0.3; 0.3, 0.8]).unwrap()
}

#[test]
fn sampled_bound_matches_expected_bound_d10() {
    let model = gen_blr_data(1000, 10, 3).unwrap();
    let k = 64;
    let schedule = AnnealingSchedule::linear(k).unwrap();
    let steps = StepSizeScheme::constant(0.2, 0.0, k).unwrap();
    let config = TransitionConfig::identity(0.5, 10).unwrap();
    let path = propagate_moments(&model, &schedule, &steps, &config, None).unwrap();
    let exact = expected_bound(&model, &path, &schedule).unwrap();
    let est = dais_bound_mc(&model.target(), &schedule, &steps, &config, 100, SplitStream::new(11)).unwrap();
    assert!((est.mean - exact).abs() <= 3.0 * est.stderr, "{} vs {exact} (se {})", est.mean, est.stderr);
}

#[test]
fn sampled_bound_matches_expected_bound_d2() {
    let model = small_model();
    let k = 16;
    let schedule = AnnealingSchedule::linear(k).unwrap();
    let steps = StepSizeScheme::constant(0.3, 0.0, k).unwrap();
    let config = TransitionConfig::identity(0.8, 2).unwrap();
    let path = propagate_moments(&model, &schedule, &steps, &config, None).unwrap();
    let exact = expected_bound(&model, &path, &schedule).unwrap();
    let est = dais_bound_mc(&model.target(), &schedule, &steps, &config, 10_000, SplitStream::new(12)).unwrap();
    assert!((est.mean - exact).abs() <= 3.0 * est.stderr, "{} vs {exact} (se {})", est.mean, est.stderr);
}

fn kinetic_sum_check(model: &BlrModel, k: usize, eta: f64, gamma: f64, chains: u64, seed: u64) {
    let target = model.target();
    let d = model.d();
    let schedule = AnnealingSchedule::linear(k).unwrap();
    let steps = StepSizeScheme::constant(eta, 0.0, k).unwrap();
    let config = TransitionConfig::identity(gamma, d).unwrap();
    let path = propagate_moments(model, &schedule, &steps, &config, None).unwrap();
    let exact = expected_kinetic_sum(&path).unwrap();

    let root = SplitStream::new(seed);
    let sums: Vec<f64> = (0..chains)
        .map(|c| {
            let mut rng = root.substream(c).rng();
            let mut theta = target.sample_p0(&mut rng);
            let mut v = standard_normals(&mut rng, d);
            let mut acc = 0.0;
            for i in 1..=k {
                let (t, v_hat) = leapfrog(&theta, &v, eta, schedule.beta(i), &target, &config).unwrap();
                acc += config.log_kinetic_density(&v_hat) - config.log_kinetic_density(&v);
                theta = t;
                v = refresh(&v_hat, config.gamma(), &mut rng, &config);
            }
            acc
        })
        .collect();
    let (mean, se) = mean_stderr(&sums);
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn sampled_kinetic_sum_matches_moments() {
    kinetic_sum_check(&small_model(), 12, 0.35, 0.6, 20_000, 13);
}

#[test]
fn sampled_kinetic_sum_matches_moments_d10() {
    kinetic_sum_check(&gen_blr_data(1000, 10, 14).unwrap(), 64, 0.2, 0.0, 10_000, 15);
}

#[test]
fn ais_acceptance_rate_is_strictly_inside_the_unit_interval() {
    let model = gen_blr_data(1000, 10, 4).unwrap();
    let k = 64;
    let grid: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64).collect();
    let eta = tune_step_size(&model, k, 0.0, &grid).unwrap();
    let schedule = AnnealingSchedule::linear(k).unwrap();
    let steps = StepSizeScheme::constant(eta, 0.0, k).unwrap();
    let config = TransitionConfig::identity(0.0, 10).unwrap();
    let run = ais_mh_chain(&model.target(), &schedule, &steps, &config, 1, SplitStream::new(5)).unwrap();
    assert!(run.accept_rate > 0.0 && run.accept_rate < 1.0, "rate {}", run.accept_rate);
    assert!(run.log_weight.is_finite());
}

#[test]
fn ais_weights_bound_the_toy_evidence() {
    let model = toy();
    let log_z = exact_log_ml(&model);
    let k = 1000;
    let schedule = AnnealingSchedule::linear(k).unwrap();
    let steps = StepSizeScheme::constant(0.5, 0.0, k).unwrap();
    let config = TransitionConfig::identity(0.0, 1).unwrap();
    let root = SplitStream::new(6);
    let weights: Vec<f64> = (0..400u64)
        .map(|c| ais_mh_chain(&model.target(), &schedule, &steps, &config, 1, root.substream(c)).unwrap().log_weight)
        .collect();
    let (mean, se) = mean_stderr(&weights);
    assert!(mean <= log_z + 3.0 * se, "{mean} vs {log_z} (se {se})");
    // with this many intermediate distributions the weights are nearly exact
    assert!((mean - log_z).abs() < 0.01, "{mean} vs {log_z}");
}

#[test]
fn leapfrog_on_toy_matches_the_hand_written_affine_map() {
    // posterior precision at beta is 1 + beta and mean beta / (1 + beta)
    let target = toy().target();
    let config = TransitionConfig::identity(0.0, 1).unwrap();
    for &(theta, v, eta, beta) in &[(0.3, -1.0, 0.2, 0.5), (-2.0, 0.7, 0.9, 1.0), (1.5, 0.0, 0.05, 0.0)] {
        let (t, vh) = leapfrog(&dvector![theta], &dvector![v], eta, beta, &target, &config).unwrap();
        let lam = 1.0 + beta;
        let mu = beta / lam;
        let a = 1.0 - eta * eta * lam / 2.0;
        let t_expect = a * (theta - mu) + mu + eta * (1.0 - eta * eta * lam / 4.0) * v;
        let v_expect = -eta * lam * (theta - mu) + a * v;
        assert!((t[0] - t_expect).abs() < 1e-12 && (vh[0] - v_expect).abs() < 1e-12);
    }
}

#[test]
fn prior_draws_share_the_chain_stream_order() {
    // the prior draw comes before the momentum draw on the same substream
    let target = small_model().target();
    let mut a = SplitStream::new(1).rng();
    let theta = target.sample_p0(&mut a);
    let v: DVector<f64> = standard_normals(&mut a, 2);
    let mut b = SplitStream::new(1).rng();
    assert_eq!(target.sample_p0(&mut b), theta);
    assert_eq!(standard_normals(&mut b, 2), v);
}

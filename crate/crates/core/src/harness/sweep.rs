use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::blr::{exact_log_ml, gap_breakdown, minibatch_noise_cov, propagate_moments, BlrModel, MinibatchTarget};
use crate::error::{DaisError, Result};
use crate::rng::SplitStream;
use crate::sampler::{dais_bound_mc, TransitionConfig};
use crate::schedule::{AnnealingSchedule, StepSizeScheme};
use crate::target::{noisy_gradient, GradientNoiseSpec};

use super::config::{ExperimentConfig, NoiseSetting, SweepMode};
use super::data::gen_blr_data;

/// One `(K, c)` cell of a sweep. Failed cells carry the error message and
/// a NaN gap.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub k: usize,
    pub c: f64,
    pub gamma: f64,
    pub mode: SweepMode,
    pub batch_size: Option<usize>,
    pub gap: f64,
    pub stderr: f64,
    pub elapsed_ms: f64,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// `(c, a)` pairs actually used.
    pub bases: Vec<(f64, f64)>,
    /// Step size chosen at the smallest `K` when `a` was tuned.
    pub tuned_eta: Option<f64>,
    pub log_ml: f64,
}

/// Gradient-noise covariance implied by the config, if any.
pub fn noise_spec(config: &ExperimentConfig, model: &BlrModel) -> Result<Option<GradientNoiseSpec>> {
    if let Some(b) = config.batch_size {
        return Ok(Some(GradientNoiseSpec::Full(minibatch_noise_cov(model, b)?)));
    }
    Ok(match &config.sigma_eps {
        None => None,
        Some(NoiseSetting::Isotropic(v)) => Some(GradientNoiseSpec::isotropic(*v, model.d())),
        Some(NoiseSetting::Diagonal(v)) => Some(GradientNoiseSpec::Diagonal(DVector::from_vec(v.clone()))),
    })
}

fn exact_gap(
    model: &BlrModel,
    k: usize,
    steps: StepSizeScheme,
    config: &TransitionConfig,
    noise: Option<&GradientNoiseSpec>,
) -> Result<f64> {
    let schedule = AnnealingSchedule::linear(k)?;
    let path = propagate_moments(model, &schedule, &steps, config, noise)?;
    Ok(gap_breakdown(model, &path, &schedule)?.total)
}

/// Picks the step size in `grid` with the smallest noise-free exact gap at
/// `k` steps.
pub fn tune_step_size(model: &BlrModel, k: usize, gamma: f64, grid: &[f64]) -> Result<f64> {
    let config = TransitionConfig::identity(gamma, model.d())?;
    let mut best: Option<(f64, f64)> = None;
    for &eta in grid {
        let Ok(gap) = exact_gap(model, k, StepSizeScheme::from_steps(vec![eta; k])?, &config, None) else {
            continue;
        };
        if gap.is_finite() && best.is_none_or(|(_, g)| gap < g) {
            best = Some((eta, gap));
        }
    }
    best.map(|(eta, _)| eta)
        .ok_or_else(|| DaisError::invalid("no step size in the tuning grid gives a finite gap"))
}

fn cell_stream(seed: u64, k: usize, c: f64, mode: SweepMode) -> SplitStream {
    SplitStream::new(seed).substream(k as u64).substream(c.to_bits()).substream(mode.index())
}

/// Runs every `(c, K)` cell of the config; rows come out ordered by `c` then
/// `K`, independent of how cells are scheduled.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate().map_err(|e| DaisError::invalid(e.to_string()))?;
    let model = gen_blr_data(config.n, config.d, config.seed)?;
    let log_ml = exact_log_ml(&model);
    let noise = noise_spec(config, &model)?;
    let transition = TransitionConfig::identity(config.gamma, config.d)?;
    let k_min = config.k_grid[0];

    let (bases, tuned_eta) = match config.a {
        Some(a) => (config.c_list.iter().map(|&c| (c, a)).collect::<Vec<_>>(), None),
        None => {
            let eta = tune_step_size(&model, k_min, config.gamma, &config.eta_grid)?;
            let bases = config.c_list.iter().map(|&c| (c, eta * (k_min as f64).powf(c))).collect();
            (bases, Some(eta))
        }
    };

    // Theory mode anchors each line at the exact gap of the smallest K.
    let anchors: Vec<Result<f64>> = if config.mode == SweepMode::Theory {
        bases
            .par_iter()
            .map(|&(c, a)| exact_gap(&model, k_min, StepSizeScheme::constant(a, c, k_min)?, &transition, noise.as_ref()))
            .collect()
    } else {
        Vec::new()
    };

    let cells: Vec<(usize, usize)> =
        (0..bases.len()).flat_map(|ci| config.k_grid.iter().map(move |&k| (ci, k))).collect();
    let rows = cells
        .par_iter()
        .map(|&(ci, k)| {
            let (c, a) = bases[ci];
            let start = Instant::now();
            let outcome: Result<(f64, f64)> = (|| {
                let steps = StepSizeScheme::constant(a, c, k)?;
                match config.mode {
                    SweepMode::Exact => Ok((exact_gap(&model, k, steps, &transition, noise.as_ref())?, 0.0)),
                    SweepMode::Theory => {
                        let anchor = match &anchors[ci] {
                            Ok(g) => *g,
                            Err(e) => return Err(DaisError::invalid(format!("anchor cell failed: {e}"))),
                        };
                        let slope = 2.0 * c - 1.0;
                        Ok((anchor * (k as f64 / k_min as f64).powf(slope), 0.0))
                    }
                    SweepMode::Mc => {
                        let schedule = AnnealingSchedule::linear(k)?;
                        let stream = cell_stream(config.seed, k, c, config.mode);
                        let base = model.target();
                        let est = match (config.batch_size, &noise) {
                            (Some(b), _) => {
                                let t = MinibatchTarget::new(&model, b, stream.substream(u64::MAX))?;
                                dais_bound_mc(&t, &schedule, &steps, &transition, config.mc_chains, stream)?
                            }
                            (None, Some(spec)) => {
                                let t = noisy_gradient(&base, spec.clone(), stream.substream(u64::MAX))?;
                                dais_bound_mc(&t, &schedule, &steps, &transition, config.mc_chains, stream)?
                            }
                            (None, None) => {
                                dais_bound_mc(&base, &schedule, &steps, &transition, config.mc_chains, stream)?
                            }
                        };
                        Ok((log_ml - est.mean, est.stderr))
                    }
                }
            })();
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let (gap, stderr, error) = match outcome {
                Ok((g, s)) if g.is_finite() => (g, s, None),
                Ok(_) => (f64::NAN, f64::NAN, Some("non-finite gap".to_string())),
                Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
            };
            ResultRow {
                k,
                c,
                gamma: config.gamma,
                mode: config.mode,
                batch_size: config.batch_size,
                gap,
                stderr,
                elapsed_ms,
                seed: config.seed,
                error,
            }
        })
        .collect();
    Ok(SweepOutput { rows, bases, tuned_eta, log_ml })
}


#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: SweepMode) -> ExperimentConfig {
        ExperimentConfig {
            n: 200,
            d: 3,
            k_grid: vec![16, 32, 64],
            c_list: vec![0.25, 0.5],
            mode,
            mc_chains: 200,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn theory_mode_follows_the_slope() {
        let cfg = ExperimentConfig { k_grid: vec![16, 64], c_list: vec![0.25], ..small(SweepMode::Theory) };
        let out = run_sweep(&cfg).unwrap();
        let ratio = out.rows[1].gap / out.rows[0].gap;
        assert!((ratio - 0.5).abs() < 1e-12);
        assert!(out.rows.iter().all(|r| r.stderr == 0.0));
    }

    #[test]
    fn exact_and_mc_rows() {
        let exact = run_sweep(&small(SweepMode::Exact)).unwrap();
        assert_eq!(exact.rows.len(), 6);
        assert!(exact.rows.iter().all(|r| r.error.is_none() && r.stderr == 0.0 && r.gap > 0.0));
        assert_eq!((exact.rows[0].c, exact.rows[0].k), (0.25, 16));
        assert_eq!((exact.rows[5].c, exact.rows[5].k), (0.5, 64));
        let mc = run_sweep(&small(SweepMode::Mc)).unwrap();
        assert!(mc.rows.iter().all(|r| r.stderr > 0.0));
        let again = run_sweep(&small(SweepMode::Mc)).unwrap();
        let gaps = |o: &SweepOutput| o.rows.iter().map(|r| r.gap).collect::<Vec<_>>();
        assert_eq!(gaps(&mc), gaps(&again));
    }

    #[test]
    fn tuned_base_reproduces_the_tuned_step() {
        let out = run_sweep(&small(SweepMode::Exact)).unwrap();
        let eta = out.tuned_eta.unwrap();
        for (c, a) in out.bases {
            assert!((a * 16f64.powf(-c) - eta).abs() < 1e-12);
        }
    }

    #[test]
    fn failing_cells_become_error_rows() {
        // Step sizes this large make the leapfrog map unstable.
        let cfg = ExperimentConfig { a: Some(1e6), c_list: vec![0.0], mode: SweepMode::Mc, ..small(SweepMode::Mc) };
        let out = run_sweep(&cfg).unwrap();
        assert!(out.rows.iter().all(|r| r.error.is_some() && r.gap.is_nan()));
    }

    #[test]
    fn noisy_sweeps_run_in_every_mode() {
        for mode in [SweepMode::Exact, SweepMode::Mc, SweepMode::Theory] {
            let cfg = ExperimentConfig { batch_size: Some(20), ..small(mode) };
            let out = run_sweep(&cfg).unwrap();
            assert!(out.rows.iter().all(|r| r.error.is_none()), "{mode:?}");
            let cfg = ExperimentConfig { sigma_eps: Some(NoiseSetting::Isotropic(0.5)), ..small(mode) };
            assert!(run_sweep(&cfg).unwrap().rows.iter().all(|r| r.error.is_none()));
        }
    }
}

use nalgebra::{dmatrix, dvector};

use crate::blr::{exact_log_ml, expected_bound, propagate_moments, BlrModel};
use crate::error::Result;
use crate::rng::SplitStream;
use crate::sampler::{dais_bound_mc, dais_chain_values, TransitionConfig};
use crate::schedule::{AnnealingSchedule, StepSizeScheme};
use crate::stats::mean_stderr;
use crate::target::AnnealedTarget;

use super::data::gen_blr_data;

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub seed: u64,
    /// Chains for the unbiasedness check on the one-dimensional model.
    pub unbiased_chains: usize,
    /// Chains for the exact-versus-Monte-Carlo check.
    pub mc_chains: usize,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub eta: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { seed: 0, unbiased_chains: 200_000, mc_chains: 1000, n: 1000, d: 10, k: 64, eta: 0.2 }
    }
}

#[derive(Clone, Debug)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// One observation, one parameter, unit variances.
fn toy() -> BlrModel {
    BlrModel::new(dmatrix![1.0], dvector![1.0], 1.0, dvector![0.0], dmatrix![1.0])
        .expect("toy model is valid")
}

/// Simpson's rule for `log int p(D | theta) p_0(theta) dtheta` in one dimension.
fn simpson_log_ml(model: &BlrModel, lo: f64, hi: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (hi - lo) / m as f64;
    let target = model.target();
    let f = |t: f64| target.log_f(1.0, &dvector![t]).expect("beta = 1 is valid").exp();
    let mut acc = f(lo) + f(hi);
    for i in 1..m {
        acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (acc * h / 3.0).ln()
}

/// Closed form against quadrature, unbiasedness of `exp(L)`, exact versus
/// Monte Carlo bound, and the lower-bound property.
pub fn run_oracles(opts: &OracleOptions) -> Result<Vec<OracleOutcome>> {
    let mut out = Vec::new();
    let root = SplitStream::new(opts.seed);

    let model = toy();
    let closed = exact_log_ml(&model);
    let quad = simpson_log_ml(&model, -15.0, 15.0, 200_000);
    out.push(OracleOutcome {
        name: "closed-form evidence vs quadrature",
        passed: (closed - quad).abs() <= 1e-8,
        detail: format!("closed {closed:.10}, quadrature {quad:.10}"),
    });

    let schedule = AnnealingSchedule::linear(8)?;
    let steps = StepSizeScheme::constant(0.2, 0.0, 8)?;
    let config = TransitionConfig::identity(0.0, 1)?;
    let values = dais_chain_values(&model.target(), &schedule, &steps, &config, opts.unbiased_chains, root.substream(1))?;
    let ratios: Vec<f64> = values.iter().map(|l| (l - closed).exp()).collect();
    let (mean, se) = mean_stderr(&ratios);
    out.push(OracleOutcome {
        name: "unbiasedness of exp(L)",
        passed: (mean - 1.0).abs() <= 3.0 * se,
        detail: format!("mean exp(L - log Z) = {mean:.6} +- {se:.6} over {} chains", opts.unbiased_chains),
    });

    let model = gen_blr_data(opts.n, opts.d, opts.seed)?;
    let log_z = exact_log_ml(&model);
    let schedule = AnnealingSchedule::linear(opts.k)?;
    let steps = StepSizeScheme::constant(opts.eta, 0.0, opts.k)?;
    let config = TransitionConfig::identity(0.0, opts.d)?;
    let path = propagate_moments(&model, &schedule, &steps, &config, None)?;
    let exact = expected_bound(&model, &path, &schedule)?;
    let mc = dais_bound_mc(&model.target(), &schedule, &steps, &config, opts.mc_chains, root.substream(2))?;
    out.push(OracleOutcome {
        name: "exact vs Monte Carlo bound",
        passed: (exact - mc.mean).abs() <= 3.0 * mc.stderr,
        detail: format!("exact {exact:.6}, MC {:.6} +- {:.6}", mc.mean, mc.stderr),
    });
    out.push(OracleOutcome {
        name: "Monte Carlo bound below log Z",
        passed: mc.mean <= log_z + 3.0 * mc.stderr,
        detail: format!("MC {:.6} +- {:.6}, log Z {log_z:.6}", mc.mean, mc.stderr),
    });
    Ok(out)
}

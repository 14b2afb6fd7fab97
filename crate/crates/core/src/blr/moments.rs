use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{DaisError, Result};
use crate::sampler::TransitionConfig;
use crate::schedule::{check_lengths, AnnealingSchedule, StepSizeScheme};
use crate::target::GradientNoiseSpec;

use super::dynamics::update_matrices_with_mass;
use super::model::{derive_posterior, BlrModel};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const PSD_TOL: f64 = 1e-10;

/// Exact Gaussian law of the chain state `(theta_k, v_k)` after step `k`.
///
/// `sigma` is the joint `2d x 2d` covariance with `theta` first. The
/// pre-refresh momentum moments `mu_vhat` and `sigma_vhat` are `None` at
/// `k = 0`.
#[derive(Clone, Debug)]
pub struct JointMoments {
    pub mu_theta: DVector<f64>,
    pub mu_v: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub mu_vhat: Option<DVector<f64>>,
    pub sigma_vhat: Option<DMatrix<f64>>,
}

impl JointMoments {
    /// `theta_0 ~ N(mu_p, Sigma_p)` independent of `v_0 ~ N(0, M)`.
    pub fn initial(model: &BlrModel, mass: &DVector<f64>) -> Result<Self> {
        let d = model.d();
        if mass.len() != d {
            return Err(DaisError::invalid("mass must have length d"));
        }
        let sigma_p = Cholesky::new(model.lambda_p().clone())
            .ok_or(DaisError::NotPositiveDefinite("prior precision"))?
            .inverse();
        let mut sigma = DMatrix::zeros(2 * d, 2 * d);
        sigma.view_mut((0, 0), (d, d)).copy_from(&sigma_p);
        sigma.view_mut((d, d), (d, d)).set_diagonal(mass);
        Ok(JointMoments {
            mu_theta: model.mu_p().clone(),
            mu_v: DVector::zeros(d),
            sigma,
            mu_vhat: None,
            sigma_vhat: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu_theta.len()
    }

    pub fn sigma_theta(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.sigma.view((0, 0), (d, d)).into_owned()
    }

    pub fn sigma_v(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.sigma.view((d, d), (d, d)).into_owned()
    }
}

/// Moments at `k = 0, ..., K` together with the transition settings that
/// produced them.
#[derive(Clone, Debug)]
pub struct MomentPath {
    pub moments: Vec<JointMoments>,
    pub mass: DVector<f64>,
    pub gamma: f64,
    pub noisy: bool,
}

impl MomentPath {
    pub fn steps(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn last(&self) -> &JointMoments {
        self.moments.last().expect("a path holds at least the initial moments")
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn check_psd(sigma: &DMatrix<f64>, step: usize) -> Result<()> {
    let scale = sigma.diagonal().amax().max(1.0);
    let n = sigma.nrows();
    let jittered = sigma + DMatrix::<f64>::identity(n, n) * (PSD_TOL * scale);
    if Cholesky::new(jittered).is_some() {
        return Ok(());
    }
    let min = sigma.clone().symmetric_eigenvalues().min();
    if min < -PSD_TOL * scale {
        return Err(DaisError::LostDefiniteness { step, min_eigenvalue: min });
    }
    Ok(())
}

/// Pushes the joint Gaussian of `(theta, v)` through every leapfrog step and
/// refreshment. With `noise`, each gradient carries additive `N(0, Sigma_eps)`
/// noise; the same draw enters the position as `eta^2/2 W eps` and the
/// momentum as `eta eps`.
pub fn propagate_moments(
    model: &BlrModel,
    schedule: &AnnealingSchedule,
    steps: &StepSizeScheme,
    config: &TransitionConfig,
    noise: Option<&GradientNoiseSpec>,
) -> Result<MomentPath> {
    check_lengths(schedule, steps)?;
    let d = model.d();
    let mass = config.mass().clone();
    let gamma = config.gamma();
    let w = mass.map(|m| 1.0 / m);
    let sigma_eps = match noise {
        Some(spec) => {
            if spec.dim() != d {
                return Err(DaisError::invalid("noise dimension does not match the model"));
            }
            spec.factor()?;
            Some(spec.covariance())
        }
        None => None,
    };

    let first = JointMoments::initial(model, &mass)?;
    let mut mu = DVector::zeros(2 * d);
    mu.rows_mut(0, d).copy_from(&first.mu_theta);
    let mut sigma = first.sigma.clone();
    let mut out = Vec::with_capacity(schedule.steps() + 1);
    out.push(first);

    let refresh_scale = DVector::from_fn(2 * d, |i, _| if i < d { 1.0 } else { gamma });
    for k in 1..=schedule.steps() {
        let eta = steps.eta(k);
        let u = update_matrices_with_mass(model, schedule.beta(k), eta, &mass)?;
        let (t, off) = u.joint();
        mu = &t * &mu + off;
        sigma = &t * &sigma * t.transpose();
        if let Some(se) = &sigma_eps {
            let e2 = eta * eta;
            let mut q = DMatrix::zeros(2 * d, 2 * d);
            let wse = DMatrix::from_fn(d, d, |i, j| w[i] * se[(i, j)]);
            let wsew = DMatrix::from_fn(d, d, |i, j| w[i] * se[(i, j)] * w[j]);
            q.view_mut((0, 0), (d, d)).copy_from(&(wsew * (0.25 * e2 * e2)));
            q.view_mut((0, d), (d, d)).copy_from(&(&wse * (0.5 * e2 * eta)));
            q.view_mut((d, 0), (d, d)).copy_from(&(wse.transpose() * (0.5 * e2 * eta)));
            q.view_mut((d, d), (d, d)).copy_from(&(se * e2));
            sigma += q;
        }
        symmetrize(&mut sigma);
        let mu_vhat = mu.rows(d, d).into_owned();
        let sigma_vhat = sigma.view((d, d), (d, d)).into_owned();

        if gamma != 1.0 {
            mu.component_mul_assign(&refresh_scale);
            for j in 0..2 * d {
                for i in 0..2 * d {
                    sigma[(i, j)] *= refresh_scale[i] * refresh_scale[j];
                }
            }
            let fresh = 1.0 - gamma * gamma;
            for i in 0..d {
                sigma[(d + i, d + i)] += fresh * mass[i];
            }
        }
        check_psd(&sigma, k)?;
        out.push(JointMoments {
            mu_theta: mu.rows(0, d).into_owned(),
            mu_v: mu.rows(d, d).into_owned(),
            sigma: sigma.clone(),
            mu_vhat: Some(mu_vhat),
            sigma_vhat: Some(sigma_vhat),
        });
    }
    Ok(MomentPath { moments: out, mass, gamma, noisy: sigma_eps.is_some() })
}

/// `E[v^T W v]` for `v ~ N(mu, S)`.
fn weighted_second_moment(mu: &DVector<f64>, s: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..mu.len() {
        acc += w[i] * (mu[i] * mu[i] + s[(i, i)]);
    }
    acc
}

/// `sum_k E[log pi(v_hat_k) - log pi(v_{k-1})]` from the Gaussian moments.
pub fn expected_kinetic_sum(path: &MomentPath) -> Result<f64> {
    let w = path.mass.map(|m| 1.0 / m);
    let mut total = 0.0;
    for k in 1..path.moments.len() {
        let cur = &path.moments[k];
        let prev = &path.moments[k - 1];
        let (Some(mu_vhat), Some(sigma_vhat)) = (&cur.mu_vhat, &cur.sigma_vhat) else {
            return Err(DaisError::invalid(format!("missing pre-refresh moments at step {k}")));
        };
        total += -0.5 * weighted_second_moment(mu_vhat, sigma_vhat, &w)
            + 0.5 * weighted_second_moment(&prev.mu_v, &prev.sigma_v(), &w);
    }
    Ok(total)
}

fn check_path(model: &BlrModel, path: &MomentPath, schedule: &AnnealingSchedule) -> Result<()> {
    if path.steps() != schedule.steps() {
        return Err(DaisError::invalid(format!(
            "moment path has {} steps but the schedule has {}",
            path.steps(),
            schedule.steps()
        )));
    }
    if path.last().dim() != model.d() {
        return Err(DaisError::invalid("moment path dimension does not match the model"));
    }
    Ok(())
}

/// `E[log N(theta; mu_p, Lambda_p^-1)]` for `theta ~ N(mu, s)`.
fn expected_log_prior(model: &BlrModel, mu: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let lp = model.lambda_p();
    let r = mu - model.mu_p();
    -0.5 * model.d() as f64 * LN_2PI + 0.5 * model.prior().log_det_precision()
        - 0.5 * (lp * s).trace()
        - 0.5 * r.dot(&(lp * &r))
}

/// `E[log p(D | theta)]` for `theta ~ N(mu, s)`.
fn expected_log_likelihood(model: &BlrModel, mu: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let xtx = model.lambda_lld() * model.sigma2();
    let xty = model.lld_shift() * model.sigma2();
    let rss = model.yty() - 2.0 * mu.dot(&xty) + mu.dot(&(&xtx * mu));
    -0.5 * model.n() as f64 * (LN_2PI + model.sigma2().ln())
        - rss / (2.0 * model.sigma2())
        - 0.5 * (model.lambda_lld() * s).trace()
}

/// `E[L] = E log p(D | theta_K) + E log p_0(theta_K) - E log p_0(theta_0) + kinetic`.
pub fn expected_bound(model: &BlrModel, path: &MomentPath, schedule: &AnnealingSchedule) -> Result<f64> {
    check_path(model, path, schedule)?;
    let first = &path.moments[0];
    let last = path.last();
    let s_last = last.sigma_theta();
    Ok(expected_log_likelihood(model, &last.mu_theta, &s_last)
        + expected_log_prior(model, &last.mu_theta, &s_last)
        - expected_log_prior(model, &first.mu_theta, &first.sigma_theta())
        + expected_kinetic_sum(path)?)
}

/// The three parts of `log Z - E[L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapBreakdown {
    /// `1/2 ||mu_K - mu_pos||^2` in the posterior precision.
    pub term1: f64,
    /// `1/2 Tr(Lambda_pos Sigma_K) - d/2`.
    pub term2: f64,
    /// `1/2 log(|Sigma_pos| / |Sigma_p|)` minus the expected kinetic sum.
    pub term3: f64,
    pub total: f64,
}

pub fn gap_breakdown(model: &BlrModel, path: &MomentPath, schedule: &AnnealingSchedule) -> Result<GapBreakdown> {
    check_path(model, path, schedule)?;
    let post = derive_posterior(model)?;
    let last = path.last();
    let r = &last.mu_theta - &post.mu;
    let term1 = 0.5 * r.dot(&(&post.lambda * &r));
    let term2 = 0.5 * (&post.lambda * last.sigma_theta()).trace() - 0.5 * model.d() as f64;
    let term3 = 0.5 * (model.prior().log_det_precision() - post.log_det_lambda())
        - expected_kinetic_sum(path)?;
    Ok(GapBreakdown { term1, term2, term3, total: term1 + term2 + term3 })
}

/// `sum_k eta_k^2 / 2 * Tr(Sigma_eps)`: the bound inflation caused by
/// additive gradient noise.
pub fn stochastic_penalty(steps: &StepSizeScheme, noise: &GradientNoiseSpec) -> f64 {
    let tr = noise.trace();
    steps.per_step().iter().map(|e| 0.5 * e * e * tr).sum()
}

/// Predicted log-log slope of the gap against `K` for `eta ~ K^-c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheorySlope {
    pub slope: f64,
    /// Whether `c` lies in `[1/4, 1/2)`, where the rate is established.
    pub valid: bool,
}

pub fn theory_slope(c: f64) -> TheorySlope {
    TheorySlope { slope: 2.0 * c - 1.0, valid: (0.25..0.5).contains(&c) }
}

use std::sync::Mutex;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::error::{DaisError, Result};
use crate::rng::SplitStream;
use crate::target::{
    check_beta, AnnealedTarget, BaseDensity, GaussianPrior, GeometricTarget, LogLikelihood,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `y ~ N(X theta, sigma2 I)` with prior `theta ~ N(mu_p, Lambda_p^-1)`.
///
/// The sufficient statistics `X^T X`, `X^T y` and `y^T y` are cached, so
/// likelihood evaluations cost `O(d^2)` regardless of `n`.
#[derive(Clone, Debug)]
pub struct BlrModel {
    x: DMatrix<f64>,
    y: DVector<f64>,
    sigma2: f64,
    prior: GaussianPrior,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl BlrModel {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        sigma2: f64,
        mu_p: DVector<f64>,
        lambda_p: DMatrix<f64>,
    ) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(DaisError::invalid("need at least one observation (use BlrModel::empty)"));
        }
        Self::build(x, y, sigma2, mu_p, lambda_p)
    }

    /// The degenerate model with no observations, whose posterior is the
    /// prior and whose evidence is 1.
    pub fn empty(sigma2: f64, mu_p: DVector<f64>, lambda_p: DMatrix<f64>) -> Result<Self> {
        let d = mu_p.len();
        Self::build(DMatrix::zeros(0, d), DVector::zeros(0), sigma2, mu_p, lambda_p)
    }

    fn build(
        x: DMatrix<f64>,
        y: DVector<f64>,
        sigma2: f64,
        mu_p: DVector<f64>,
        lambda_p: DMatrix<f64>,
    ) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(DaisError::invalid(format!("sigma2 must be positive, got {sigma2}")));
        }
        if x.nrows() != y.len() {
            return Err(DaisError::invalid(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != mu_p.len() || mu_p.is_empty() {
            return Err(DaisError::invalid("X columns must match a non-empty prior mean"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(DaisError::invalid("data must be finite"));
        }
        let prior = GaussianPrior::new(mu_p, lambda_p)?;
        let xtx = x.tr_mul(&x);
        let xty = x.tr_mul(&y);
        let yty = y.dot(&y);
        Ok(BlrModel { x, y, sigma2, prior, xtx, xty, yty })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn mu_p(&self) -> &DVector<f64> {
        self.prior.mean()
    }

    pub fn lambda_p(&self) -> &DMatrix<f64> {
        self.prior.precision()
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    /// `Lambda_lld = X^T X / sigma2`.
    pub fn lambda_lld(&self) -> DMatrix<f64> {
        &self.xtx / self.sigma2
    }

    /// `X^T y / sigma2`, which equals `Lambda_lld mu_*` whenever the
    /// least-squares solution `mu_*` exists.
    pub fn lld_shift(&self) -> DVector<f64> {
        &self.xty / self.sigma2
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    pub fn likelihood(&self) -> LinearGaussianLikelihood {
        LinearGaussianLikelihood {
            n: self.n(),
            sigma2: self.sigma2,
            xtx: self.xtx.clone(),
            xty: self.xty.clone(),
            yty: self.yty,
        }
    }

    /// The geometric annealing path from the prior to the posterior.
    pub fn target(&self) -> BlrTarget {
        GeometricTarget::new(self.prior.clone(), self.likelihood()).expect("dimensions agree")
    }

    /// `log p(y | theta)` evaluated row by row.
    pub fn log_likelihood(&self, theta: &DVector<f64>) -> f64 {
        let r = &self.y - &self.x * theta;
        -0.5 * self.n() as f64 * (LN_2PI + self.sigma2.ln()) - r.dot(&r) / (2.0 * self.sigma2)
    }
}

pub type BlrTarget = GeometricTarget<GaussianPrior, LinearGaussianLikelihood>;

/// Gaussian likelihood in sufficient-statistic form.
#[derive(Clone, Debug)]
pub struct LinearGaussianLikelihood {
    n: usize,
    sigma2: f64,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl LogLikelihood for LinearGaussianLikelihood {
    fn dim(&self) -> usize {
        self.xty.len()
    }

    fn log_likelihood(&self, theta: &DVector<f64>) -> f64 {
        let rss = self.yty - 2.0 * theta.dot(&self.xty) + theta.dot(&(&self.xtx * theta));
        -0.5 * self.n as f64 * (LN_2PI + self.sigma2.ln()) - rss / (2.0 * self.sigma2)
    }

    fn grad_log_likelihood(&self, theta: &DVector<f64>) -> DVector<f64> {
        (&self.xty - &self.xtx * theta) / self.sigma2
    }
}

/// `N(mu, Lambda^-1)` at inverse temperature `beta`.
#[derive(Clone, Debug)]
pub struct AnnealedGaussian {
    pub beta: f64,
    pub mu: DVector<f64>,
    pub lambda: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl AnnealedGaussian {
    /// `log det Lambda`.
    pub fn log_det_lambda(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
    }

    /// `Lambda^-1`, from the Cholesky factor.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `Lambda^-1 b` without forming the inverse.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }
}

/// `Lambda^beta = Lambda_p + beta Lambda_lld` and
/// `mu^beta = (Lambda^beta)^-1 (Lambda_p mu_p + beta X^T y / sigma2)`.
pub fn annealed_posterior(model: &BlrModel, beta: f64) -> Result<AnnealedGaussian> {
    check_beta(beta)?;
    let lambda = model.lambda_p() + model.lambda_lld() * beta;
    let h = model.lambda_p() * model.mu_p() + model.lld_shift() * beta;
    let chol = Cholesky::new(lambda.clone())
        .ok_or(DaisError::NotPositiveDefinite("annealed posterior precision"))?;
    let mu = chol.solve(&h);
    Ok(AnnealedGaussian { beta, mu, lambda, chol })
}

pub fn derive_posterior(model: &BlrModel) -> Result<AnnealedGaussian> {
    annealed_posterior(model, 1.0)
}

/// `log p(D)` from the Gaussian normalising constants.
pub fn exact_log_ml(model: &BlrModel) -> f64 {
    let post = derive_posterior(model).expect("posterior precision of a valid model is SPD");
    let n = model.n() as f64;
    let mu_p = model.mu_p();
    -0.5 * n * (LN_2PI + model.sigma2.ln())
        + 0.5 * (model.prior.log_det_precision() - post.log_det_lambda())
        + 0.5 * post.mu.dot(&(&post.lambda * &post.mu))
        - model.yty / (2.0 * model.sigma2)
        - 0.5 * mu_p.dot(&(model.lambda_p() * mu_p))
}

fn check_theta(model: &BlrModel, theta: &DVector<f64>) -> Result<()> {
    if theta.len() != model.d() {
        return Err(DaisError::invalid(format!(
            "theta has length {} but the model has d = {}",
            theta.len(),
            model.d()
        )));
    }
    Ok(())
}

/// `grad log f_beta(theta) = -Lambda_p (theta - mu_p) + (beta / sigma2) X^T (y - X theta)`.
pub fn blr_grad(model: &BlrModel, beta: f64, theta: &DVector<f64>) -> Result<DVector<f64>> {
    check_beta(beta)?;
    check_theta(model, theta)?;
    let prior = -(model.lambda_p() * (theta - model.mu_p()));
    Ok(prior + (&model.xty - &model.xtx * theta) * (beta / model.sigma2))
}

/// Mini-batch estimate of [`blr_grad`]: the average of `b` single-row
/// estimators, each scaled by `n`. Rows may repeat.
pub fn blr_minibatch_grad(
    model: &BlrModel,
    beta: f64,
    theta: &DVector<f64>,
    batch: &[usize],
) -> Result<DVector<f64>> {
    check_beta(beta)?;
    check_theta(model, theta)?;
    if batch.is_empty() {
        return Err(DaisError::invalid("mini-batch must not be empty"));
    }
    let mut acc = DVector::zeros(model.d());
    for &i in batch {
        if i >= model.n() {
            return Err(DaisError::invalid(format!("row index {i} out of range for n = {}", model.n())));
        }
        let row = model.x.row(i);
        let resid = model.y[i] - (row * theta)[0];
        acc += row.transpose() * resid;
    }
    let scale = beta * model.n() as f64 / (model.sigma2 * batch.len() as f64);
    Ok(-(model.lambda_p() * (theta - model.mu_p())) + acc * scale)
}

/// `size` row indices drawn uniformly with replacement.
pub fn sample_batch(n: usize, size: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    (0..size).map(|_| rng.random_range(0..n)).collect()
}

/// Covariance of the mini-batch gradient error at the posterior mean,
/// `Sigma_eps = n^2 / (b sigma2^2) Cov_i(x_i r_i)` with residuals
/// `r = y - X mu_pos` and rows sampled with replacement.
pub fn minibatch_noise_cov(model: &BlrModel, batch_size: usize) -> Result<DMatrix<f64>> {
    if batch_size == 0 || batch_size > model.n() {
        return Err(DaisError::invalid(format!(
            "batch size must lie in 1..={}, got {batch_size}",
            model.n()
        )));
    }
    let post = derive_posterior(model)?;
    let n = model.n();
    let d = model.d();
    let resid = &model.y - &model.x * &post.mu;
    let mut g = model.x.clone();
    for (i, mut row) in g.row_iter_mut().enumerate() {
        row *= resid[i];
    }
    let mean = g.row_mean();
    let mut cov = DMatrix::zeros(d, d);
    for row in g.row_iter() {
        let c = row - &mean;
        cov += c.transpose() * c;
    }
    cov /= n as f64;
    let nf = n as f64;
    Ok(cov * (nf * nf / (batch_size as f64 * model.sigma2 * model.sigma2)))
}

/// BLR annealing path whose gradients use a fresh mini-batch per call.
pub struct MinibatchTarget<'a> {
    model: &'a BlrModel,
    target: BlrTarget,
    batch_size: usize,
    rng: Mutex<ChaCha8Rng>,
}

impl<'a> MinibatchTarget<'a> {
    pub fn new(model: &'a BlrModel, batch_size: usize, stream: SplitStream) -> Result<Self> {
        if batch_size == 0 || batch_size > model.n() {
            return Err(DaisError::invalid(format!(
                "batch size must lie in 1..={}, got {batch_size}",
                model.n()
            )));
        }
        Ok(MinibatchTarget { model, target: model.target(), batch_size, rng: Mutex::new(stream.rng()) })
    }
}

impl AnnealedTarget for MinibatchTarget<'_> {
    fn dim(&self) -> usize {
        self.model.d()
    }

    fn log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<f64> {
        self.target.log_f(beta, theta)
    }

    fn grad_log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let batch = {
            let mut rng = self.rng.lock().expect("batch sampler poisoned");
            sample_batch(self.model.n(), self.batch_size, &mut *rng)
        };
        blr_minibatch_grad(self.model, beta, theta, &batch)
    }

    fn sample_p0(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.model.prior.sample(rng)
    }

    fn log_p0(&self, theta: &DVector<f64>) -> f64 {
        self.model.prior.log_density(theta)
    }

    fn fork(&self, stream: SplitStream) -> Option<Box<dyn AnnealedTarget + '_>> {
        Some(Box::new(MinibatchTarget {
            model: self.model,
            target: self.target.clone(),
            batch_size: self.batch_size,
            rng: Mutex::new(stream.rng()),
        }))
    }
}

//! Annealed targets `f_beta(theta) = p_0(theta) * L(theta)^beta`.

use std::sync::Mutex;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::error::{DaisError, Result};
use crate::rng::{standard_normals, SplitStream};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Everything a sampler needs to know about the annealing path.
///
/// Implementations must keep `grad_log_f` consistent with `log_f`; the
/// bundled targets are checked against central finite differences.
pub trait AnnealedTarget: Send + Sync {
    fn dim(&self) -> usize;

    /// `log f_beta(theta)` including all normalising constants of the prior
    /// and likelihood, so that `log_f(1, .)` is the log joint density.
    fn log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<f64>;

    fn grad_log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<DVector<f64>>;

    /// Exact draw from the normalised base distribution `p_0`.
    fn sample_p0(&self, rng: &mut dyn RngCore) -> DVector<f64>;

    fn log_p0(&self, theta: &DVector<f64>) -> f64;

    /// A view of this target whose internal randomness (stochastic gradients)
    /// is driven by `stream`. Deterministic targets return `None` and are
    /// shared as-is between chains.
    fn fork(&self, _stream: SplitStream) -> Option<Box<dyn AnnealedTarget + '_>> {
        None
    }
}

impl<T: AnnealedTarget + ?Sized> AnnealedTarget for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<f64> {
        (**self).log_f(beta, theta)
    }
    fn grad_log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).grad_log_f(beta, theta)
    }
    fn sample_p0(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        (**self).sample_p0(rng)
    }
    fn log_p0(&self, theta: &DVector<f64>) -> f64 {
        (**self).log_p0(theta)
    }
    fn fork(&self, stream: SplitStream) -> Option<Box<dyn AnnealedTarget + '_>> {
        (**self).fork(stream)
    }
}

/// A normalised, exactly samplable base distribution.
pub trait BaseDensity: Send + Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, theta: &DVector<f64>) -> f64;
    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64>;
    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64>;
}

/// The data term that gets annealed in.
pub trait LogLikelihood: Send + Sync {
    fn dim(&self) -> usize;
    fn log_likelihood(&self, theta: &DVector<f64>) -> f64;
    fn grad_log_likelihood(&self, theta: &DVector<f64>) -> DVector<f64>;
}

/// `N(mean, precision^-1)`.
#[derive(Clone, Debug)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det_precision: f64,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        if precision.nrows() != mean.len() || precision.ncols() != mean.len() {
            return Err(DaisError::invalid("prior precision must be d x d"));
        }
        if (&precision - precision.transpose()).amax() > 1e-12 * (1.0 + precision.amax()) {
            return Err(DaisError::NotPositiveDefinite("prior precision is not symmetric"));
        }
        let chol = Cholesky::new(precision.clone())
            .ok_or(DaisError::NotPositiveDefinite("prior precision"))?;
        let log_det_precision = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        Ok(GaussianPrior { mean, precision, chol, log_det_precision })
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log_det_precision(&self) -> f64 {
        self.log_det_precision
    }
}

impl BaseDensity for GaussianPrior {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        let r = theta - &self.mean;
        let quad = r.dot(&(&self.precision * &r));
        -0.5 * (self.dim() as f64 * LN_2PI - self.log_det_precision + quad)
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        -(&self.precision * (theta - &self.mean))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let z = standard_normals(rng, self.dim());
        // L^T x = z gives Cov(x) = (L L^T)^-1.
        let x = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        &self.mean + x
    }
}

/// Zero log-likelihood: `f_1 = p_0`, so every annealed density is the prior.
#[derive(Clone, Copy, Debug)]
pub struct FlatLikelihood {
    pub dim: usize,
}

impl LogLikelihood for FlatLikelihood {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_likelihood(&self, _theta: &DVector<f64>) -> f64 {
        0.0
    }
    fn grad_log_likelihood(&self, _theta: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
}

/// Geometric path between a base density and the joint density.
#[derive(Clone, Debug)]
pub struct GeometricTarget<P, L> {
    prior: P,
    likelihood: L,
}

pub fn geometric_target<P: BaseDensity, L: LogLikelihood>(
    prior: P,
    likelihood: L,
) -> Result<GeometricTarget<P, L>> {
    GeometricTarget::new(prior, likelihood)
}

impl<P: BaseDensity, L: LogLikelihood> GeometricTarget<P, L> {
    pub fn new(prior: P, likelihood: L) -> Result<Self> {
        if prior.dim() != likelihood.dim() {
            return Err(DaisError::invalid(format!(
                "prior has dimension {} but likelihood has {}",
                prior.dim(),
                likelihood.dim()
            )));
        }
        Ok(GeometricTarget { prior, likelihood })
    }

    pub fn prior(&self) -> &P {
        &self.prior
    }

    pub fn likelihood(&self) -> &L {
        &self.likelihood
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(DaisError::invalid(format!("beta must lie in [0, 1], got {beta}")))
    }
}

impl<P: BaseDensity, L: LogLikelihood> AnnealedTarget for GeometricTarget<P, L> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<f64> {
        check_beta(beta)?;
        let base = self.prior.log_density(theta);
        if beta == 0.0 {
            return Ok(base);
        }
        Ok(base + beta * self.likelihood.log_likelihood(theta))
    }

    fn grad_log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<DVector<f64>> {
        check_beta(beta)?;
        let mut g = self.prior.grad_log_density(theta);
        if beta != 0.0 {
            g.axpy(beta, &self.likelihood.grad_log_likelihood(theta), 1.0);
        }
        Ok(g)
    }

    fn sample_p0(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.prior.sample(rng)
    }

    fn log_p0(&self, theta: &DVector<f64>) -> f64 {
        self.prior.log_density(theta)
    }
}

/// Covariance of the additive gradient noise.
#[derive(Clone, Debug, PartialEq)]
pub enum GradientNoiseSpec {
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

impl GradientNoiseSpec {
    pub fn isotropic(variance: f64, dim: usize) -> Self {
        GradientNoiseSpec::Diagonal(DVector::from_element(dim, variance))
    }

    pub fn zero(dim: usize) -> Self {
        Self::isotropic(0.0, dim)
    }

    pub fn dim(&self) -> usize {
        match self {
            GradientNoiseSpec::Diagonal(v) => v.len(),
            GradientNoiseSpec::Full(m) => m.nrows(),
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            GradientNoiseSpec::Diagonal(v) => DMatrix::from_diagonal(v),
            GradientNoiseSpec::Full(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            GradientNoiseSpec::Diagonal(v) => v.sum(),
            GradientNoiseSpec::Full(m) => m.trace(),
        }
    }

    /// Checks positive semi-definiteness and returns a square-root factor
    /// `F` with `F F^T = Sigma`.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        match self {
            GradientNoiseSpec::Diagonal(v) => {
                if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return Err(DaisError::NotPositiveDefinite("noise variances must be >= 0"));
                }
                Ok(DMatrix::from_diagonal(&v.map(f64::sqrt)))
            }
            GradientNoiseSpec::Full(m) => {
                if m.nrows() != m.ncols() {
                    return Err(DaisError::invalid("noise covariance must be square"));
                }
                let scale = 1.0 + m.amax();
                if (m - m.transpose()).amax() > 1e-12 * scale {
                    return Err(DaisError::NotPositiveDefinite("noise covariance is not symmetric"));
                }
                let eig = m.clone().symmetric_eigen();
                if eig.eigenvalues.min() < -1e-10 * scale {
                    return Err(DaisError::NotPositiveDefinite("noise covariance"));
                }
                let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root))
            }
        }
    }
}

/// Wraps a target so that every gradient call returns `grad + eps`,
/// `eps ~ N(0, Sigma_eps)` drawn fresh per call. `log_f` is unchanged.
pub struct NoisyGradient<T> {
    inner: T,
    spec: GradientNoiseSpec,
    factor: DMatrix<f64>,
    rng: Mutex<ChaCha8Rng>,
}

pub fn noisy_gradient<T: AnnealedTarget>(
    target: T,
    spec: GradientNoiseSpec,
    stream: SplitStream,
) -> Result<NoisyGradient<T>> {
    if spec.dim() != target.dim() {
        return Err(DaisError::invalid("noise dimension does not match target"));
    }
    let factor = spec.factor()?;
    Ok(NoisyGradient { inner: target, spec, factor, rng: Mutex::new(stream.rng()) })
}

impl<T> NoisyGradient<T> {
    pub fn spec(&self) -> &GradientNoiseSpec {
        &self.spec
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: AnnealedTarget> AnnealedTarget for NoisyGradient<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<f64> {
        self.inner.log_f(beta, theta)
    }

    fn grad_log_f(&self, beta: f64, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.inner.grad_log_f(beta, theta)?;
        let z = {
            let mut rng = self.rng.lock().expect("noise generator poisoned");
            standard_normals(&mut *rng, self.dim())
        };
        Ok(g + &self.factor * z)
    }

    fn sample_p0(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.inner.sample_p0(rng)
    }

    fn log_p0(&self, theta: &DVector<f64>) -> f64 {
        self.inner.log_p0(theta)
    }

    fn fork(&self, stream: SplitStream) -> Option<Box<dyn AnnealedTarget + '_>> {
        let inner: &dyn AnnealedTarget = &self.inner;
        Some(Box::new(NoisyGradient {
            inner,
            spec: self.spec.clone(),
            factor: self.factor.clone(),
            rng: Mutex::new(stream.rng()),
        }))
    }
}

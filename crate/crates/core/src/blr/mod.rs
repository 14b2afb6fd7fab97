//! Conjugate Bayesian linear regression, where every quantity of a DAIS run
//! on `p(theta | D)` is available in closed form.
//!
//! With `y = X theta + noise`, `noise ~ N(0, sigma2 I)` and a Gaussian prior,
//! every annealed density is Gaussian and each leapfrog step is an affine map
//! of `(theta, v)`. Propagating the joint mean and covariance through those
//! maps gives the exact expected bound, without sampling.

mod dynamics;
mod model;
mod moments;

pub use dynamics::{update_matrices, update_matrices_with_mass, UpdateMatrices};
pub use model::{
    annealed_posterior, blr_grad, blr_minibatch_grad, derive_posterior, exact_log_ml,
    minibatch_noise_cov, sample_batch, AnnealedGaussian, BlrModel, BlrTarget,
    LinearGaussianLikelihood, MinibatchTarget,
};
pub use moments::{
    expected_bound, expected_kinetic_sum, gap_breakdown, propagate_moments, stochastic_penalty,
    theory_slope, GapBreakdown, JointMoments, MomentPath, TheorySlope,
};

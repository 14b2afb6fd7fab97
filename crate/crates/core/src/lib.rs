//! Differentiable annealed importance sampling (DAIS).
//!
//! DAIS estimates a log marginal likelihood by annealing from the prior to the
//! posterior with one leapfrog step plus a partial momentum refreshment per
//! intermediate distribution. Dropping the Metropolis-Hastings correction
//! makes the estimator pathwise differentiable; the price is that every
//! transition is imperfect, which this crate lets you measure exactly.
//!
//! The crate is organised in four layers:
//!
//! - [`sampler`]: the generic chain over any [`AnnealedTarget`], schedules,
//!   the stochastic-gradient wrapper, and an MH-corrected AIS baseline.
//! - [`blr`]: a closed-form Bayesian linear regression engine that
//!   propagates the exact Gaussian law of the chain state and therefore the
//!   exact expected bound and its gap to the true evidence.
//! - [`reversible`]: a memory-light forward/backward chain that recovers its
//!   starting point bit-exactly from the final state, a seed and a small
//!   buffer of bits destroyed by momentum damping.
//! - [`harness`]: synthetic data, parameter sweeps and CSV output.
//!
//! ```
//! use dais::blr::{exact_log_ml, BlrModel};
//! use dais::rng::SplitStream;
//! use dais::{dais_chain, AnnealingSchedule, StepSizeScheme, TransitionConfig};
//! use nalgebra::{dmatrix, dvector};
//!
//! let model = BlrModel::new(
//!     dmatrix![1.0],
//!     dvector![1.0],
//!     1.0,
//!     dvector![0.0],
//!     dmatrix![1.0],
//! )
//! .unwrap();
//! let target = model.target();
//! let schedule = AnnealingSchedule::linear(8).unwrap();
//! let steps = StepSizeScheme::constant(0.2, 0.0, 8).unwrap();
//! let config = TransitionConfig::identity(0.0, 1).unwrap();
//! let (state, bound) =
//!     dais_chain(&target, &schedule, &steps, &config, SplitStream::new(7)).unwrap();
//! assert_eq!(state.k, 8);
//! assert!(bound.is_finite());
//! assert!((exact_log_ml(&model) + 1.515512).abs() < 1e-6);
//! ```

pub mod blr;
pub mod error;
pub mod harness;
pub mod reversible;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod stats;
pub mod target;

pub use error::{DaisError, Result};
pub use sampler::{
    ais_mh_chain, dais_bound_mc, dais_chain, dais_chain_with_noise, dais_chain_values,
    iw_combine, leapfrog, refresh, refresh_with, AisRun, ChainNoise, ChainState, McEstimate,
    StreamNoise, TransitionConfig,
};
pub use schedule::{AnnealingSchedule, StepSizeScheme};
pub use target::{
    geometric_target, AnnealedTarget, BaseDensity, FlatLikelihood, GaussianPrior,
    GeometricTarget, GradientNoiseSpec, LogLikelihood, NoisyGradient, noisy_gradient,
};

//! Variational Bayes for state space models.
//!
//! The core method optimizes a Gaussian factor-covariance approximation over
//! the parameters jointly with a data-conditioned state approximation built
//! from an importance-sampling transition kernel, calibrated by backward
//! recursive least squares. Gaussian and hybrid variational baselines, an
//! exact Gibbs sampler for the stochastic volatility model, a bootstrap
//! particle filter, and particle MCMC are included for comparison, along
//! with two models: univariate stochastic volatility ("sv") and the
//! multivariate zero-inflated Skellam volatility model ("skellam").

pub mod data;
pub mod draws;
pub mod error;
pub mod exact;
pub mod model;
pub mod models;
pub mod rng;

#[cfg(test)]
pub(crate) mod test_oracles;

pub use data::Dataset;
pub use error::{Error, Result};
pub use model::{Registry, StatePath, StateSpaceModel};

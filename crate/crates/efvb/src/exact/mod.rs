//! Exact and particle baselines: the Kalman oracle for linear-Gaussian
//! models, the SV Gibbs sampler, the bootstrap particle filter, and
//! particle MCMC.

pub mod kalman;
pub mod ksc;
pub mod lgssm;
pub mod mcmc_sv;
pub mod pf;
pub mod pmcmc;
pub mod precision;

pub use kalman::{kalman_smoother, KalmanOutput};
pub use ksc::{ksc_mixture, MixtureApprox};
pub use lgssm::{LinearGaussianModel, LinearGaussianSystem};
pub use mcmc_sv::{mcmc_sv, KscStateSampler, McmcSvConfig, McmcSvOutput};
pub use pf::{bootstrap_pf_loglik, PfResult, Resampling};
pub use pmcmc::{pmcmc, LoglikEstimator, PfLoglik, PmcmcConfig, PmcmcOutput};

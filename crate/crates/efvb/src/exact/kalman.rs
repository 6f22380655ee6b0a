//! Kalman filter and RTS smoother for the univariate linear-Gaussian model.
//! Serves as the exact-inference oracle in the state-approximation and
//! particle-filter tests.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exact::lgssm::LinearGaussianSystem;

const LN_2PI: f64 = 1.8378770664093453;

/// Per-time filter and smoother output.
#[derive(Debug, Clone)]
pub struct KalmanOutput {
    pub pred_mean: Vec<f64>,
    pub pred_var: Vec<f64>,
    pub filt_mean: Vec<f64>,
    pub filt_var: Vec<f64>,
    pub smooth_mean: Vec<f64>,
    pub smooth_var: Vec<f64>,
    pub log_likelihood: f64,
}

/// Forward filter, backward smoother, and exact log likelihood.
pub fn kalman_smoother(sys: &LinearGaussianSystem, y: &Dataset) -> Result<KalmanOutput> {
    let t_len = y.len();
    if y.dim() != 1 {
        return Err(Error::Dimension("kalman_smoother expects one series".into()));
    }
    let mut pred_mean = vec![0.0; t_len];
    let mut pred_var = vec![0.0; t_len];
    let mut filt_mean = vec![0.0; t_len];
    let mut filt_var = vec![0.0; t_len];
    let mut loglik = 0.0;
    for t in 0..t_len {
        let (pm, pv) = if t == 0 {
            (sys.m1, sys.p1)
        } else {
            (
                sys.c + sys.a * filt_mean[t - 1],
                sys.a * sys.a * filt_var[t - 1] + sys.q,
            )
        };
        pred_mean[t] = pm;
        pred_var[t] = pv;
        let innov_var = sys.h * sys.h * pv + sys.r;
        if !(innov_var > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "innovation variance at t = {}",
                t + 1
            )));
        }
        let innov = y.at(t + 1)[0] - sys.h * pm;
        loglik += -0.5 * (LN_2PI + innov_var.ln()) - 0.5 * innov * innov / innov_var;
        let gain = pv * sys.h / innov_var;
        filt_mean[t] = pm + gain * innov;
        filt_var[t] = (1.0 - gain * sys.h) * pv;
    }
    let mut smooth_mean = filt_mean.clone();
    let mut smooth_var = filt_var.clone();
    for t in (0..t_len - 1).rev() {
        let j = filt_var[t] * sys.a / pred_var[t + 1];
        smooth_mean[t] = filt_mean[t] + j * (smooth_mean[t + 1] - pred_mean[t + 1]);
        smooth_var[t] = filt_var[t] + j * j * (smooth_var[t + 1] - pred_var[t + 1]);
    }
    Ok(KalmanOutput {
        pred_mean,
        pred_var,
        filt_mean,
        filt_var,
        smooth_mean,
        smooth_var,
        log_likelihood: loglik,
    })
}

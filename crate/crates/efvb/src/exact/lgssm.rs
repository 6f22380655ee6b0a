//! Univariate linear-Gaussian state space model, used as a test bed for the
//! state approximation (where it must be exact), the particle filter
//! (unbiasedness against the Kalman likelihood), and particle MCMC.
//!
//! ```text
//! y_t = h x_t + v_t,          v_t ~ N(0, r)
//! x_t = c + a x_{t-1} + w_t,  w_t ~ N(0, q)    (t >= 2)
//! x_1 ~ N(m1, p1)
//! ```
//!
//! Free parameters are `(c, q)` with `q` log-transformed and priors
//! `c ~ N(0, 100)`, `log q ~ N(0, 1)`; the rest is fixed at construction.

use nalgebra::{DVector, DVectorView};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{GaussPrecision, StatePath, StateSpaceModel};

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    pub h: f64,
    pub r: f64,
    pub a: f64,
    pub m1: f64,
    pub p1: f64,
}

impl LinearGaussianModel {
    pub fn new(h: f64, r: f64, a: f64, m1: f64, p1: f64) -> Self {
        LinearGaussianModel { h, r, a, m1, p1 }
    }

    /// Fixed-structure view used by the Kalman routines, at parameters
    /// `(c, q)`.
    pub fn system(&self, theta_c: &DVector<f64>) -> LinearGaussianSystem {
        LinearGaussianSystem {
            h: self.h,
            r: self.r,
            a: self.a,
            c: theta_c[0],
            q: theta_c[1],
            m1: self.m1,
            p1: self.p1,
        }
    }
}

/// Fully pinned linear-Gaussian system passed to the Kalman filter.
#[derive(Debug, Clone, Copy)]
pub struct LinearGaussianSystem {
    pub h: f64,
    pub r: f64,
    pub a: f64,
    pub c: f64,
    pub q: f64,
    pub m1: f64,
    pub p1: f64,
}

impl StateSpaceModel for LinearGaussianModel {
    fn as_dyn(&self) -> &dyn StateSpaceModel {
        self
    }

    fn name(&self) -> &str {
        "linear-gaussian"
    }

    fn dim_obs(&self) -> usize {
        1
    }

    fn dim_state(&self) -> usize {
        1
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn theta_names(&self) -> Vec<String> {
        vec!["c".into(), "q".into()]
    }

    fn unconstrain(&self, theta_c: &DVector<f64>) -> Result<DVector<f64>> {
        if !(theta_c[1] > 0.0) {
            return Err(Error::Domain(format!("q = {} not positive", theta_c[1])));
        }
        Ok(DVector::from_vec(vec![theta_c[0], theta_c[1].ln()]))
    }

    fn constrain(&self, theta_u: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![theta_u[0], theta_u[1].exp()])
    }

    fn measurement_logdensity(
        &self,
        _t: usize,
        y_t: DVectorView<'_, f64>,
        x_t: DVectorView<'_, f64>,
        _theta_c: &DVector<f64>,
    ) -> f64 {
        let resid = y_t[0] - self.h * x_t[0];
        -0.5 * LN_2PI - 0.5 * self.r.ln() - 0.5 * resid * resid / self.r
    }

    fn transition_mean_into(
        &self,
        t: usize,
        x_prev: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
        out: &mut DVector<f64>,
    ) {
        out[0] = if t == 1 {
            self.m1
        } else {
            theta_c[0] + self.a * x_prev[0]
        };
    }

    fn transition_precision(&self, t: usize, theta_c: &DVector<f64>) -> GaussPrecision {
        GaussPrecision::from_variance(if t == 1 { self.p1 } else { theta_c[1] })
    }

    fn log_prior(&self, theta_u: &DVector<f64>) -> f64 {
        let (c, u) = (theta_u[0], theta_u[1]);
        -0.5 * (LN_2PI + 100f64.ln()) - c * c / 200.0 - 0.5 * LN_2PI - 0.5 * u * u
    }

    fn log_prior_grad(&self, theta_u: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-theta_u[0] / 100.0, -theta_u[1]])
    }

    fn log_joint_grad(
        &self,
        theta_u: &DVector<f64>,
        x: &StatePath,
        y: &Dataset,
    ) -> DVector<f64> {
        let (c, q) = (theta_u[0], theta_u[1].exp());
        let mut g_c = 0.0;
        let mut g_u = 0.0;
        for t in 2..=y.len() {
            let resid = x[(0, t - 1)] - c - self.a * x[(0, t - 2)];
            g_c += resid / q;
            g_u += -0.5 + resid * resid / (2.0 * q);
        }
        self.log_prior_grad(theta_u) + DVector::from_vec(vec![g_c, g_u])
    }

    fn simulate_measurement(
        &self,
        _t: usize,
        x_t: DVectorView<'_, f64>,
        _theta_c: &DVector<f64>,
        rng: &mut ChaCha12Rng,
    ) -> DVector<f64> {
        let z: f64 = StandardNormal.sample(rng);
        DVector::from_element(1, self.h * x_t[0] + self.r.sqrt() * z)
    }

    fn check_simulation_domain(&self, theta_c: &DVector<f64>) -> Result<()> {
        if !(theta_c[1] >= 0.0) {
            return Err(Error::Domain("q must be >= 0".into()));
        }
        Ok(())
    }

    fn default_init(&self, _y: &Dataset) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::test_oracles::central_diff_grad;

    #[test]
    fn gradient_matches_finite_differences() {
        let model = LinearGaussianModel::new(1.0, 0.5, 0.8, 0.0, 2.0);
        let theta_c = DVector::from_vec(vec![0.3, 0.7]);
        let mut rng = rng_from_seed(12);
        let (y, x) = model.simulate(&theta_c, 30, &mut rng).unwrap();
        let theta_u = model.unconstrain(&theta_c).unwrap();
        let analytic = model.log_joint_grad(&theta_u, &x, &y);
        let numeric = central_diff_grad(&theta_u, 1e-6, |tu| model.log_joint(tu, &x, &y));
        for i in 0..2 {
            assert!(
                (analytic[i] - numeric[i]).abs() < 1e-6 * numeric[i].abs().max(1.0),
                "coord {i}"
            );
        }
    }
}

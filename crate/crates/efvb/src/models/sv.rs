//! Univariate stochastic volatility model.
//!
//! ```text
//! y_t | x_t           ~ N(0, exp(x_t))
//! x_t | x_{t-1}       ~ N(xbar + rho (x_{t-1} - xbar), sigma^2)
//! x_1                 ~ N(xbar, s^2),   s^2 = sigma^2 / (1 - rho^2)
//! ```
//!
//! Parameters are `(xbar, rho, sigma)` on the constrained scale and
//! `(xbar, kappa, c)` on the real line with `rho = 0.995 / (1 + exp(-kappa))`
//! and `sigma = exp(c / 2)`. Priors on the unconstrained scale:
//!
//! ```text
//! p(xbar)  = N(0, 1000)
//! p(kappa) = exp(kappa) / (1 + exp(kappa))^2          (uniform rho on (0, 0.995))
//! p(c)    ~= exp(-alpha c) exp(-beta exp(-c))          (inverse gamma on sigma^2)
//! ```
//!
//! The log-joint gradient below is the closed form over `(xbar, kappa, c)`,
//! including the stationary first-period term.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{GaussPrecision, StatePath, StateSpaceModel};

const RHO_CAP: f64 = 0.995;
const LN_2PI: f64 = 1.8378770664093453;

/// Stochastic volatility model; registered under the name "sv".
#[derive(Debug, Clone)]
pub struct SvModel {
    /// Shape of the inverse gamma prior on sigma^2.
    pub alpha: f64,
    /// Rate of the inverse gamma prior on sigma^2.
    pub beta: f64,
}

impl Default for SvModel {
    fn default() -> Self {
        SvModel {
            alpha: 1.001,
            beta: 1.001,
        }
    }
}

/// Constrained parameters unpacked from a vector `(xbar, rho, sigma)`.
#[derive(Debug, Clone, Copy)]
pub struct SvParams {
    pub xbar: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl SvParams {
    pub fn from_vec(theta_c: &DVector<f64>) -> Self {
        SvParams {
            xbar: theta_c[0],
            rho: theta_c[1],
            sigma: theta_c[2],
        }
    }

    /// Stationary variance `sigma^2 / (1 - rho^2)`.
    pub fn stationary_var(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - self.rho * self.rho)
    }
}

impl SvModel {
    fn unpack_unconstrained(&self, theta_u: &DVector<f64>) -> (f64, f64, f64, SvParams) {
        let (xbar, kappa, c) = (theta_u[0], theta_u[1], theta_u[2]);
        let rho = RHO_CAP / (1.0 + (-kappa).exp());
        let sigma = (0.5 * c).exp();
        (xbar, kappa, c, SvParams { xbar, rho, sigma })
    }
}

impl StateSpaceModel for SvModel {
    fn as_dyn(&self) -> &dyn StateSpaceModel {
        self
    }

    fn name(&self) -> &str {
        "sv"
    }

    fn dim_obs(&self) -> usize {
        1
    }

    fn dim_state(&self) -> usize {
        1
    }

    fn dim_theta(&self) -> usize {
        3
    }

    fn theta_names(&self) -> Vec<String> {
        vec!["x_bar".into(), "rho".into(), "sigma".into()]
    }

    fn unconstrain(&self, theta_c: &DVector<f64>) -> Result<DVector<f64>> {
        let p = SvParams::from_vec(theta_c);
        if !p.xbar.is_finite() {
            return Err(Error::Domain("x_bar must be finite".into()));
        }
        if !(p.rho > 0.0 && p.rho < RHO_CAP) {
            return Err(Error::Domain(format!(
                "rho = {} outside (0, {RHO_CAP})",
                p.rho
            )));
        }
        if !(p.sigma > 0.0 && p.sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma = {} not positive", p.sigma)));
        }
        let kappa = (p.rho / (RHO_CAP - p.rho)).ln();
        let c = 2.0 * p.sigma.ln();
        Ok(DVector::from_vec(vec![p.xbar, kappa, c]))
    }

    fn constrain(&self, theta_u: &DVector<f64>) -> DVector<f64> {
        let (xbar, _, _, p) = self.unpack_unconstrained(theta_u);
        DVector::from_vec(vec![xbar, p.rho, p.sigma])
    }

    fn measurement_logdensity(
        &self,
        _t: usize,
        y_t: DVectorView<'_, f64>,
        x_t: DVectorView<'_, f64>,
        _theta_c: &DVector<f64>,
    ) -> f64 {
        let (y, x) = (y_t[0], x_t[0]);
        -0.5 * LN_2PI - 0.5 * x - 0.5 * y * y * (-x).exp()
    }

    fn transition_mean_into(
        &self,
        t: usize,
        x_prev: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
        out: &mut DVector<f64>,
    ) {
        let p = SvParams::from_vec(theta_c);
        out[0] = if t == 1 {
            p.xbar
        } else {
            p.xbar + p.rho * (x_prev[0] - p.xbar)
        };
    }

    fn transition_precision(&self, t: usize, theta_c: &DVector<f64>) -> GaussPrecision {
        let p = SvParams::from_vec(theta_c);
        let var = if t == 1 {
            p.stationary_var()
        } else {
            p.sigma * p.sigma
        };
        GaussPrecision::from_variance(var)
    }

    fn log_prior(&self, theta_u: &DVector<f64>) -> f64 {
        let (xbar, kappa, c, _) = self.unpack_unconstrained(theta_u);
        let p_xbar = -0.5 * (LN_2PI + 1000f64.ln()) - xbar * xbar / 2000.0;
        let p_kappa = kappa - 2.0 * ln_1p_exp(kappa);
        let p_c = self.alpha * self.beta.ln() - ln_gamma(self.alpha) - self.alpha * c
            - self.beta * (-c).exp();
        p_xbar + p_kappa + p_c
    }

    fn log_prior_grad(&self, theta_u: &DVector<f64>) -> DVector<f64> {
        let (xbar, _, c, p) = self.unpack_unconstrained(theta_u);
        DVector::from_vec(vec![
            -xbar / 1000.0,
            1.0 - 2.0 * p.rho / RHO_CAP,
            -self.alpha + self.beta * (-c).exp(),
        ])
    }

    fn log_joint_grad(
        &self,
        theta_u: &DVector<f64>,
        x: &StatePath,
        y: &Dataset,
    ) -> DVector<f64> {
        let (xbar, _, _, p) = self.unpack_unconstrained(theta_u);
        let (rho, sigma) = (p.rho, p.sigma);
        let sig2 = sigma * sigma;
        let s2 = p.stationary_var();
        let t_len = y.len();
        let drho_dkappa = rho * (1.0 - rho / RHO_CAP);

        let x1 = x[(0, 0)];
        let mut g_xbar = (x1 - xbar) / s2;
        let mut brace_rho = rho / (1.0 - rho * rho) * ((x1 - xbar) * (x1 - xbar) / s2 - 1.0);
        let mut g_c = -0.5 + (x1 - xbar) * (x1 - xbar) / (2.0 * s2);
        for t in 2..=t_len {
            let (xt, xp) = (x[(0, t - 1)], x[(0, t - 2)]);
            let resid = xt - xbar - rho * (xp - xbar);
            g_xbar += (1.0 - rho) * resid / sig2;
            brace_rho += (xp - xbar) * resid / sig2;
            g_c += -0.5 + resid * resid / (2.0 * sig2);
        }

        self.log_prior_grad(theta_u)
            + DVector::from_vec(vec![g_xbar, brace_rho * drho_dkappa, g_c])
    }

    fn state_grad(
        &self,
        theta_u: &DVector<f64>,
        x: &StatePath,
        y: &Dataset,
    ) -> Option<DVector<f64>> {
        let (xbar, _, _, p) = self.unpack_unconstrained(theta_u);
        let (rho, sigma) = (p.rho, p.sigma);
        let sig2 = sigma * sigma;
        let s2 = p.stationary_var();
        let t_len = y.len();
        let mut grad = DVector::zeros(t_len);
        for t in 1..=t_len {
            let xt = x[(0, t - 1)];
            let yt = y.at(t)[0];
            let mut g = -0.5 + 0.5 * yt * yt * (-xt).exp();
            let resid_t = if t == 1 {
                (xt - xbar) / s2
            } else {
                (xt - xbar - rho * (x[(0, t - 2)] - xbar)) / sig2
            };
            g -= resid_t;
            if t < t_len {
                let resid_next = (x[(0, t)] - xbar - rho * (xt - xbar)) / sig2;
                g += rho * resid_next;
            }
            grad[t - 1] = g;
        }
        Some(grad)
    }

    fn simulate_measurement(
        &self,
        _t: usize,
        x_t: DVectorView<'_, f64>,
        _theta_c: &DVector<f64>,
        rng: &mut ChaCha12Rng,
    ) -> DVector<f64> {
        let z: f64 = StandardNormal.sample(rng);
        DVector::from_element(1, (0.5 * x_t[0]).exp() * z)
    }

    fn check_simulation_domain(&self, theta_c: &DVector<f64>) -> Result<()> {
        let p = SvParams::from_vec(theta_c);
        if !p.xbar.is_finite() {
            return Err(Error::Domain("x_bar must be finite".into()));
        }
        if !(0.0..=RHO_CAP).contains(&p.rho) {
            return Err(Error::Domain(format!("rho = {} outside [0, {RHO_CAP}]", p.rho)));
        }
        if !(p.sigma >= 0.0 && p.sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma = {} negative", p.sigma)));
        }
        Ok(())
    }

    fn default_init(&self, y: &Dataset) -> DVector<f64> {
        let var = y.series_variance(0).max(1e-12);
        DVector::from_vec(vec![var.ln(), 0.9, 0.3])
    }

    fn initial_state_guess(&self, y: &Dataset) -> StatePath {
        let level = y.series_variance(0).max(1e-12).ln();
        DMatrix::from_element(1, y.len(), level)
    }
}

/// `ln(1 + exp(v))` without overflow.
fn ln_1p_exp(v: f64) -> f64 {
    if v > 35.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

/// Lanczos approximation of `ln Gamma(x)` for `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, &g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

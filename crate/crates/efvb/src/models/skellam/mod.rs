//! Multivariate zero-inflated Skellam stochastic volatility model.
//!
//! Price changes `y_{i,t}` are integers with
//!
//! ```text
//! p(y_{i,t} | x_{i,t}, theta) = kappa_i delta_0(y) + (1 - kappa_i) exp(-sig2_{i,t}) I_{|y|}(sig2_{i,t}),
//! sig2_{i,t} = exp(s_{i,t} + x_{i,t}),    s_{i,t} = w_t' beta_i,
//! x_t | x_{t-1} ~ N(xbar + Omega x_{t-1}, Sigma),   Sigma = (L L')^{-1},
//! ```
//!
//! with `Omega = diag(omega)`, intraday spline seasonality `s_{i,t}` on a
//! zero-sum basis, and a fixed pre-sample state `x_0`. Unconstrained
//! parameters are `(logit kappa, xbar, vech(L*), logit omega, beta_1..beta_N)`
//! where `L*` logs the diagonal of `L`. Priors imply uniform `kappa_i` and
//! `omega_i`, `N(0, 100)` on `xbar_i` and each `beta` coefficient, and a
//! Jeffreys prior on `Sigma`.

pub mod bessel;
pub mod spline;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{GaussPrecision, ModelOptions, StatePath, StateSpaceModel};

pub use bessel::bessel_i_scaled;
pub use spline::SeasonalBasis;

const LN_2PI: f64 = 1.8378770664093453;

/// Zero-inflated Skellam probability mass.
pub fn skellam_pmf(y: i64, sigma2: f64, kappa: f64) -> Result<f64> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain(format!("sigma2 = {sigma2} must be >= 0")));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Domain(format!("kappa = {kappa} outside [0, 1]")));
    }
    let scaled = bessel_i_scaled(y.unsigned_abs() as u32, sigma2)?;
    Ok(if y == 0 {
        kappa + (1.0 - kappa) * scaled
    } else {
        (1.0 - kappa) * scaled
    })
}

/// Where the fixed pre-sample state `x_0` comes from.
#[derive(Debug, Clone)]
pub enum X0 {
    /// Pinned vector (per-series log sample variances when fitted to data).
    Fixed(DVector<f64>),
    /// Stationary mean `(I - Omega)^{-1} xbar` of the state recursion; used
    /// when simulating from given parameters.
    Stationary,
}

/// Configuration of the Skellam model read from config files.
#[derive(Debug, Clone)]
pub struct SkellamSpec {
    pub n_assets: usize,
    pub periods_per_day: usize,
    /// Knot positions as intraday grid indices.
    pub knots: [usize; 4],
}

impl SkellamSpec {
    pub fn new(n_assets: usize, periods_per_day: usize, knots: [usize; 4]) -> Self {
        SkellamSpec {
            n_assets,
            periods_per_day,
            knots,
        }
    }

    pub fn from_options(options: &ModelOptions) -> Result<Self> {
        let n_assets = options.get_usize("n_assets").unwrap_or(1);
        let periods = options.get_usize("periods_per_day").unwrap_or(390);
        let knots = match options.get_usize_list("knots") {
            Some(v) if v.len() == 4 => [v[0], v[1], v[2], v[3]],
            Some(v) => {
                return Err(Error::Config(format!("need exactly 4 knots, got {}", v.len())))
            }
            // Defaults follow the trading-day layout: just after the open,
            // half an hour in, midday, and the close.
            None => {
                let p = periods - 1;
                [p / 390, p * 30 / 390, p * 180 / 390, p]
            }
        };
        Ok(SkellamSpec::new(n_assets, periods, knots))
    }
}

#[derive(Debug, Clone)]
pub struct SkellamModel {
    n: usize,
    basis: SeasonalBasis,
    x0: X0,
}

impl SkellamModel {
    pub fn new(spec: SkellamSpec, x0: X0) -> Result<Self> {
        let basis = SeasonalBasis::build(spec.periods_per_day, spec.knots)?;
        if let X0::Fixed(v) = &x0 {
            if v.len() != spec.n_assets {
                return Err(Error::Dimension("x0 length != n_assets".into()));
            }
        }
        Ok(SkellamModel {
            n: spec.n_assets,
            basis,
            x0,
        })
    }

    /// Model for fitting: `x_0` pinned at per-series log sample variances.
    pub fn for_data(spec: SkellamSpec, y: &Dataset) -> Result<Self> {
        if y.dim() != spec.n_assets {
            return Err(Error::Dimension(format!(
                "dataset has {} series, model expects {}",
                y.dim(),
                spec.n_assets
            )));
        }
        for i in 0..y.dim() {
            for t in 1..=y.len() {
                let v = y.at(t)[i];
                if (v - v.round()).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "skellam observations must be integers, found {v}"
                    )));
                }
            }
        }
        let x0 = DVector::from_fn(spec.n_assets, |i, _| y.series_variance(i).max(1e-8).ln());
        Self::new(spec, X0::Fixed(x0))
    }

    /// Model for simulating from given parameters.
    pub fn for_simulation(spec: SkellamSpec) -> Result<Self> {
        Self::new(spec, X0::Stationary)
    }

    pub fn basis(&self) -> &SeasonalBasis {
        &self.basis
    }

    fn vech_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    // Block offsets into the parameter vector.
    fn off_kappa(&self) -> usize {
        0
    }
    fn off_xbar(&self) -> usize {
        self.n
    }
    fn off_l(&self) -> usize {
        2 * self.n
    }
    fn off_omega(&self) -> usize {
        2 * self.n + self.vech_len()
    }
    fn off_beta(&self, i: usize) -> usize {
        3 * self.n + self.vech_len() + 3 * i
    }

    fn unpack_constrained(&self, theta_c: &DVector<f64>) -> Unpacked {
        let n = self.n;
        let kappa = theta_c.rows(self.off_kappa(), n).into_owned();
        let xbar = theta_c.rows(self.off_xbar(), n).into_owned();
        let omega = theta_c.rows(self.off_omega(), n).into_owned();
        let mut l_mat = DMatrix::zeros(n, n);
        let mut idx = self.off_l();
        for j in 0..n {
            for i in j..n {
                l_mat[(i, j)] = theta_c[idx];
                idx += 1;
            }
        }
        let betas: Vec<DVector<f64>> = (0..n)
            .map(|i| theta_c.rows(self.off_beta(i), 3).into_owned())
            .collect();
        let prec = &l_mat * l_mat.transpose();
        Unpacked {
            kappa,
            xbar,
            omega,
            l_mat,
            betas,
            prec,
        }
    }

    fn x0_vector(&self, p: &Unpacked) -> DVector<f64> {
        match &self.x0 {
            X0::Fixed(v) => v.clone(),
            X0::Stationary => {
                DVector::from_fn(self.n, |i, _| p.xbar[i] / (1.0 - p.omega[i]))
            }
        }
    }

    fn sigma2(&self, t: usize, i: usize, x_it: f64, p: &Unpacked) -> f64 {
        // Kept in log space until the final exponentiation.
        (self.basis.seasonal(t, &p.betas[i]) + x_it).exp()
    }
}

struct Unpacked {
    kappa: DVector<f64>,
    xbar: DVector<f64>,
    omega: DVector<f64>,
    l_mat: DMatrix<f64>,
    betas: Vec<DVector<f64>>,
    /// `Sigma^{-1} = L L'`.
    prec: DMatrix<f64>,
}

/// `d log pmf / d sigma2 * sigma2` for one observation, using scaled Bessel
/// ratios; finite for any representable `sigma2 > 0`.
fn dlog_meas_dx(y: i64, sigma2: f64, kappa: f64) -> f64 {
    let a = y.unsigned_abs() as u32;
    if y != 0 {
        let num = bessel_i_scaled(a - 1, sigma2).unwrap();
        let den = bessel_i_scaled(a, sigma2).unwrap();
        let ratio = if den > 1e-290 {
            num / den
        } else {
            // Continued fraction for I_{a}(z)/I_{a-1}(z), inverted.
            1.0 / bessel_ratio_cf(a, sigma2)
        };
        sigma2 * (ratio - 1.0) - a as f64
    } else {
        let i0 = bessel_i_scaled(0, sigma2).unwrap();
        let i1 = bessel_i_scaled(1, sigma2).unwrap();
        let pmf = kappa + (1.0 - kappa) * i0;
        (1.0 - kappa) * (i1 - i0) * sigma2 / pmf
    }
}

/// Gauss continued fraction for `I_nu(z) / I_{nu-1}(z)`, `nu >= 1`.
fn bessel_ratio_cf(nu: u32, z: f64) -> f64 {
    let mut f = 0.0;
    for k in (0..60).rev() {
        f = z * z / (2.0 * (nu as f64 + 1.0 + k as f64) + f);
    }
    z / (2.0 * nu as f64 + f)
}

impl StateSpaceModel for SkellamModel {
    fn as_dyn(&self) -> &dyn StateSpaceModel {
        self
    }

    fn name(&self) -> &str {
        "skellam"
    }

    fn dim_obs(&self) -> usize {
        self.n
    }

    fn dim_state(&self) -> usize {
        self.n
    }

    fn dim_theta(&self) -> usize {
        6 * self.n + self.vech_len()
    }

    fn theta_names(&self) -> Vec<String> {
        let n = self.n;
        let mut names = Vec::with_capacity(self.dim_theta());
        for i in 1..=n {
            names.push(format!("kappa{i}"));
        }
        for i in 1..=n {
            names.push(format!("x_bar{i}"));
        }
        for j in 1..=n {
            for i in j..=n {
                names.push(format!("L{i}{j}"));
            }
        }
        for i in 1..=n {
            names.push(format!("omega{i}"));
        }
        for i in 1..=n {
            for k in 1..=3 {
                names.push(format!("beta{i}_{k}"));
            }
        }
        names
    }

    fn unconstrain(&self, theta_c: &DVector<f64>) -> Result<DVector<f64>> {
        if theta_c.len() != self.dim_theta() {
            return Err(Error::Dimension("theta length".into()));
        }
        if theta_c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite parameter".into()));
        }
        let mut out = theta_c.clone();
        let n = self.n;
        for i in 0..n {
            let k = theta_c[self.off_kappa() + i];
            if !(k > 0.0 && k < 1.0) {
                return Err(Error::Domain(format!("kappa_{} = {k} outside (0, 1)", i + 1)));
            }
            out[self.off_kappa() + i] = (k / (1.0 - k)).ln();
            let w = theta_c[self.off_omega() + i];
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::Domain(format!("omega_{} = {w} outside (0, 1)", i + 1)));
            }
            out[self.off_omega() + i] = (w / (1.0 - w)).ln();
        }
        let mut idx = self.off_l();
        for j in 0..n {
            for i in j..n {
                if i == j {
                    let v = theta_c[idx];
                    if !(v > 0.0) {
                        return Err(Error::Domain(format!("L{}{} = {v} not positive", i + 1, j + 1)));
                    }
                    out[idx] = v.ln();
                }
                idx += 1;
            }
        }
        Ok(out)
    }

    fn constrain(&self, theta_u: &DVector<f64>) -> DVector<f64> {
        let mut out = theta_u.clone();
        let n = self.n;
        for i in 0..n {
            out[self.off_kappa() + i] = logistic(theta_u[self.off_kappa() + i]);
            out[self.off_omega() + i] = logistic(theta_u[self.off_omega() + i]);
        }
        let mut idx = self.off_l();
        for j in 0..n {
            for i in j..n {
                if i == j {
                    out[idx] = theta_u[idx].exp();
                }
                idx += 1;
            }
        }
        out
    }

    fn measurement_logdensity(
        &self,
        t: usize,
        y_t: DVectorView<'_, f64>,
        x_t: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
    ) -> f64 {
        let p = self.unpack_constrained(theta_c);
        let mut total = 0.0;
        for i in 0..self.n {
            let y = y_t[i].round() as i64;
            let sig2 = self.sigma2(t, i, x_t[i], &p);
            let pmf = skellam_pmf(y, sig2, p.kappa[i]).unwrap_or(0.0);
            total += pmf.max(f64::MIN_POSITIVE).ln();
        }
        total
    }

    fn transition_mean_into(
        &self,
        t: usize,
        x_prev: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
        out: &mut DVector<f64>,
    ) {
        let p = self.unpack_constrained(theta_c);
        if t == 1 {
            let x0 = self.x0_vector(&p);
            for i in 0..self.n {
                out[i] = p.xbar[i] + p.omega[i] * x0[i];
            }
        } else {
            for i in 0..self.n {
                out[i] = p.xbar[i] + p.omega[i] * x_prev[i];
            }
        }
    }

    fn transition_precision(&self, _t: usize, theta_c: &DVector<f64>) -> GaussPrecision {
        let p = self.unpack_constrained(theta_c);
        let log_det_cov = -2.0 * (0..self.n).map(|i| p.l_mat[(i, i)].ln()).sum::<f64>();
        GaussPrecision {
            precision: p.prec,
            log_det_cov,
        }
    }

    fn log_prior(&self, theta_u: &DVector<f64>) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let vk = theta_u[self.off_kappa() + i];
            total += vk - 2.0 * ln_1p_exp(vk);
            let vw = theta_u[self.off_omega() + i];
            total += vw - 2.0 * ln_1p_exp(vw);
            let xb = theta_u[self.off_xbar() + i];
            total += -0.5 * (LN_2PI + 100f64.ln()) - xb * xb / 200.0;
            for k in 0..3 {
                let b = theta_u[self.off_beta(i) + k];
                total += -0.5 * (LN_2PI + 100f64.ln()) - b * b / 200.0;
            }
        }
        // Jeffreys prior on Sigma mapped to L*:
        // -(N+1)/2 log|LL'| + sum_i (N+2-i) L*_ii, up to a constant.
        let mut idx = self.off_l();
        for j in 0..n {
            for i in j..n {
                if i == j {
                    let lstar = theta_u[idx];
                    total += -(n as f64 + 1.0) * lstar + (n as f64 + 2.0 - (i as f64 + 1.0)) * lstar;
                }
                idx += 1;
            }
        }
        total
    }

    fn log_prior_grad(&self, theta_u: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut g = DVector::zeros(self.dim_theta());
        for i in 0..n {
            g[self.off_kappa() + i] = 1.0 - 2.0 * logistic(theta_u[self.off_kappa() + i]);
            g[self.off_omega() + i] = 1.0 - 2.0 * logistic(theta_u[self.off_omega() + i]);
            g[self.off_xbar() + i] = -theta_u[self.off_xbar() + i] / 100.0;
            for k in 0..3 {
                g[self.off_beta(i) + k] = -theta_u[self.off_beta(i) + k] / 100.0;
            }
        }
        let mut idx = self.off_l();
        for j in 0..n {
            for i in j..n {
                if i == j {
                    g[idx] = 1.0 - (i as f64 + 1.0);
                }
                idx += 1;
            }
        }
        g
    }

    fn log_joint_grad(
        &self,
        theta_u: &DVector<f64>,
        x: &StatePath,
        y: &Dataset,
    ) -> DVector<f64> {
        let n = self.n;
        let t_len = y.len();
        let theta_c = self.constrain(theta_u);
        let p = self.unpack_constrained(&theta_c);
        let x0 = self.x0_vector(&p);

        let mut grad = self.log_prior_grad(theta_u);

        // Measurement blocks.
        for i in 0..n {
            let kappa = p.kappa[i];
            let mut g_kappa_c = 0.0; // d/d kappa_i on the constrained scale
            let mut g_beta = DVector::<f64>::zeros(3);
            for t in 1..=t_len {
                let yv = y.at(t)[i].round() as i64;
                let sig2 = self.sigma2(t, i, x[(i, t - 1)], &p);
                if yv == 0 {
                    let i0 = bessel_i_scaled(0, sig2).unwrap();
                    let pmf = kappa + (1.0 - kappa) * i0;
                    g_kappa_c += (1.0 - i0) / pmf;
                } else {
                    g_kappa_c += -1.0 / (1.0 - kappa);
                }
                let coeff = dlog_meas_dx(yv, sig2, kappa);
                let row = self.basis.row(t);
                for k in 0..3 {
                    g_beta[k] += coeff * row[k];
                }
            }
            grad[self.off_kappa() + i] += g_kappa_c * kappa * (1.0 - kappa);
            for k in 0..3 {
                grad[self.off_beta(i) + k] += g_beta[k];
            }
        }

        // Transition blocks. r_t = x_t - xbar - Omega x_{t-1}.
        let mut sum_r = DVector::zeros(n);
        let mut m_outer = DMatrix::zeros(n, n);
        let mut sum_omega = DVector::<f64>::zeros(n);
        let mut r = DVector::zeros(n);
        let mut pr = DVector::zeros(n);
        for t in 1..=t_len {
            let prev: DVector<f64> = if t == 1 {
                x0.clone()
            } else {
                x.column(t - 2).into_owned()
            };
            for i in 0..n {
                r[i] = x[(i, t - 1)] - p.xbar[i] - p.omega[i] * prev[i];
            }
            sum_r += &r;
            pr.gemv(1.0, &p.prec, &r, 0.0);
            for i in 0..n {
                sum_omega[i] += prev[i] * pr[i];
                for j in 0..n {
                    m_outer[(i, j)] += r[i] * r[j];
                }
            }
            // Stationary x0 depends on (xbar, omega); add the chain terms.
            if t == 1 {
                if let X0::Stationary = self.x0 {
                    for i in 0..n {
                        let om = p.omega[i];
                        // d eta_1 / d xbar_i = 1/(1-om) instead of 1.
                        grad[self.off_xbar() + i] += pr[i] * (1.0 / (1.0 - om) - 1.0);
                        // d eta_1 / d omega_i = xbar/(1-om)^2 instead of x0.
                        let extra = p.xbar[i] / ((1.0 - om) * (1.0 - om)) - x0[i];
                        grad[self.off_omega() + i] += pr[i] * extra * om * (1.0 - om);
                    }
                }
            }
        }
        // xbar block: sum_t P r_t.
        let pxr = &p.prec * &sum_r;
        for i in 0..n {
            grad[self.off_xbar() + i] += pxr[i];
            grad[self.off_omega() + i] += sum_omega[i] * p.omega[i] * (1.0 - p.omega[i]);
        }
        // L* block: per entry sum_t [delta_ij / L_ii - (r_t r_t' L)_ij],
        // diagonal entries chained through L_ii = exp(L*_ii).
        let ml = &m_outer * &p.l_mat;
        let mut idx = self.off_l();
        for j in 0..n {
            for i in j..n {
                let mut v = -ml[(i, j)];
                if i == j {
                    v *= p.l_mat[(i, i)];
                    v += t_len as f64;
                }
                grad[idx] += v;
                idx += 1;
            }
        }
        grad
    }

    fn state_grad(
        &self,
        theta_u: &DVector<f64>,
        x: &StatePath,
        y: &Dataset,
    ) -> Option<DVector<f64>> {
        let n = self.n;
        let t_len = y.len();
        let theta_c = self.constrain(theta_u);
        let p = self.unpack_constrained(&theta_c);
        let x0 = self.x0_vector(&p);
        let mut grad = DVector::zeros(n * t_len);

        let mut r = DVector::zeros(n);
        let mut pr = DVector::zeros(n);
        for t in 1..=t_len {
            let prev: DVector<f64> = if t == 1 {
                x0.clone()
            } else {
                x.column(t - 2).into_owned()
            };
            for i in 0..n {
                r[i] = x[(i, t - 1)] - p.xbar[i] - p.omega[i] * prev[i];
            }
            pr.gemv(1.0, &p.prec, &r, 0.0);
            for i in 0..n {
                let yv = y.at(t)[i].round() as i64;
                let sig2 = self.sigma2(t, i, x[(i, t - 1)], &p);
                grad[(t - 1) * n + i] += dlog_meas_dx(yv, sig2, p.kappa[i]);
                // -P r_t lands at t; Omega P r_t feeds back to t-1.
                grad[(t - 1) * n + i] -= pr[i];
                if t > 1 {
                    grad[(t - 2) * n + i] += p.omega[i] * pr[i];
                }
            }
        }
        Some(grad)
    }

    fn simulate_measurement(
        &self,
        t: usize,
        x_t: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
        rng: &mut ChaCha12Rng,
    ) -> DVector<f64> {
        use rand::Rng;
        let p = self.unpack_constrained(theta_c);
        DVector::from_fn(self.n, |i, _| {
            if rng.random::<f64>() < p.kappa[i] {
                return 0.0;
            }
            let lambda = 0.5 * self.sigma2(t, i, x_t[i], &p);
            if lambda <= 0.0 {
                return 0.0;
            }
            let pois = Poisson::new(lambda).expect("positive rate");
            let up: f64 = pois.sample(rng);
            let down: f64 = pois.sample(rng);
            up - down
        })
    }

    fn check_simulation_domain(&self, theta_c: &DVector<f64>) -> Result<()> {
        if theta_c.len() != self.dim_theta() {
            return Err(Error::Dimension("theta length".into()));
        }
        let p = self.unpack_constrained(theta_c);
        for i in 0..self.n {
            if !(0.0..=1.0).contains(&p.kappa[i]) {
                return Err(Error::Domain(format!("kappa_{}", i + 1)));
            }
            if !(0.0..1.0).contains(&p.omega[i]) {
                return Err(Error::Domain(format!("omega_{}", i + 1)));
            }
            if !(p.l_mat[(i, i)] > 0.0) {
                return Err(Error::Domain(format!("L{}{}", i + 1, i + 1)));
            }
        }
        Ok(())
    }

    fn default_init(&self, y: &Dataset) -> DVector<f64> {
        let n = self.n;
        let mut theta = DVector::zeros(self.dim_theta());
        for i in 0..n {
            theta[self.off_kappa() + i] = 0.1;
            theta[self.off_xbar() + i] = 0.1 * y.series_variance(i).max(1e-8).ln();
            theta[self.off_omega() + i] = 0.9;
        }
        let mut idx = self.off_l();
        let l_diag = (1.0f64 / 0.15).sqrt();
        for j in 0..n {
            for i in j..n {
                theta[idx] = if i == j { l_diag } else { 0.0 };
                idx += 1;
            }
        }
        theta
    }

    fn initial_state_guess(&self, y: &Dataset) -> StatePath {
        StatePath::from_fn(self.n, y.len(), |i, _| y.series_variance(i).max(1e-8).ln())
    }

    fn prepare<'a>(
        &'a self,
        theta_c: &DVector<f64>,
    ) -> Box<dyn crate::model::PreparedModel + 'a> {
        let p = self.unpack_constrained(theta_c);
        let log_det_cov = -2.0 * (0..self.n).map(|i| p.l_mat[(i, i)].ln()).sum::<f64>();
        Box::new(SkellamPrepared {
            model: self,
            p,
            log_det_cov,
        })
    }
}

struct SkellamPrepared<'a> {
    model: &'a SkellamModel,
    p: Unpacked,
    log_det_cov: f64,
}

impl crate::model::PreparedModel for SkellamPrepared<'_> {
    fn measurement_logdensity(
        &self,
        t: usize,
        y_t: DVectorView<'_, f64>,
        x_t: DVectorView<'_, f64>,
    ) -> f64 {
        let mut total = 0.0;
        for i in 0..self.model.n {
            let y = y_t[i].round() as i64;
            let sig2 = self.model.sigma2(t, i, x_t[i], &self.p);
            let pmf = skellam_pmf(y, sig2, self.p.kappa[i]).unwrap_or(0.0);
            total += pmf.max(f64::MIN_POSITIVE).ln();
        }
        total
    }

    fn transition_mean_into(
        &self,
        t: usize,
        x_prev: DVectorView<'_, f64>,
        out: &mut DVector<f64>,
    ) {
        if t == 1 {
            let x0 = self.model.x0_vector(&self.p);
            for i in 0..self.model.n {
                out[i] = self.p.xbar[i] + self.p.omega[i] * x0[i];
            }
        } else {
            for i in 0..self.model.n {
                out[i] = self.p.xbar[i] + self.p.omega[i] * x_prev[i];
            }
        }
    }

    fn transition_precision(&self, _t: usize) -> GaussPrecision {
        GaussPrecision {
            precision: self.p.prec.clone(),
            log_det_cov: self.log_det_cov,
        }
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn ln_1p_exp(v: f64) -> f64 {
    if v > 35.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::test_oracles::central_diff_grad;

    fn two_asset_model() -> SkellamModel {
        SkellamModel::for_simulation(SkellamSpec::new(2, 30, [0, 6, 15, 29])).unwrap()
    }

    fn true_theta(model: &SkellamModel) -> DVector<f64> {
        // kappa, xbar, vech(L), omega, betas
        let mut theta = DVector::zeros(model.dim_theta());
        theta[0] = 0.2;
        theta[1] = 0.05;
        theta[2] = 0.12;
        theta[3] = 0.08;
        theta[4] = 2.4; // L11
        theta[5] = -0.6; // L21
        theta[6] = 2.2; // L22
        theta[7] = 0.9;
        theta[8] = 0.85;
        theta[9] = 0.4; // beta1
        theta[10] = -0.2;
        theta[11] = 0.3;
        theta[12] = -0.1; // beta2
        theta[13] = 0.25;
        theta[14] = 0.15;
        theta
    }

    #[test]
    fn pmf_point_mass_cases() {
        assert_eq!(skellam_pmf(0, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(skellam_pmf(3, 2.0, 1.0).unwrap(), 0.0);
        assert_eq!(skellam_pmf(0, 0.0, 0.5).unwrap(), 1.0);
        assert_eq!(skellam_pmf(1, 0.0, 0.5).unwrap(), 0.0);
        let v = skellam_pmf(0, 1.0, 0.0).unwrap();
        assert!((v - 0.46575960759364044).abs() < 1e-13);
        assert!(skellam_pmf(0, -1.0, 0.5).is_err());
        assert!(skellam_pmf(0, 1.0, 1.5).is_err());
    }

    #[test]
    fn pmf_normalizes_and_matches_moments() {
        for &sig2 in &[0.1, 1.0, 10.0, 25.0] {
            for &kappa in &[0.0, 0.5] {
                let mut mass = 0.0;
                let mut second = 0.0;
                for y in -200i64..=200 {
                    let p = skellam_pmf(y, sig2, kappa).unwrap();
                    mass += p;
                    second += (y * y) as f64 * p;
                }
                assert!(
                    mass >= 1.0 - 1e-10 && mass <= 1.0 + 1e-10,
                    "mass {mass} at sig2 {sig2}, kappa {kappa}"
                );
                // Difference of two Poisson(sig2/2) draws has variance sig2.
                let want = (1.0 - kappa) * sig2;
                assert!(
                    (second - want).abs() < 1e-8,
                    "second moment {second} vs {want}"
                );
            }
        }
    }

    #[test]
    fn transform_roundtrip_and_midpoint() {
        let m = two_asset_model();
        let tc = true_theta(&m);
        let tu = m.unconstrain(&tc).unwrap();
        let back = m.constrain(&tu);
        for i in 0..tc.len() {
            assert!((back[i] - tc[i]).abs() < 1e-12, "coord {i}");
        }
        // kappa = 0.5 maps to logit zero.
        let mut tc2 = tc.clone();
        tc2[0] = 0.5;
        assert!(m.unconstrain(&tc2).unwrap()[0].abs() < 1e-12);
        // Out of domain rejected.
        tc2[0] = 1.0;
        assert!(m.unconstrain(&tc2).is_err());
        tc2[0] = 0.5;
        tc2[4] = -0.1;
        assert!(m.unconstrain(&tc2).is_err());
    }

    #[test]
    fn log_joint_grad_matches_finite_differences() {
        let m = two_asset_model();
        let tc = true_theta(&m);
        let mut rng = rng_from_seed(9);
        let (y, _) = m.simulate(&tc, 5, &mut rng).unwrap();
        // Fit-side model with pinned x0, as used in estimation.
        let fit = SkellamModel::for_data(SkellamSpec::new(2, 30, [0, 6, 15, 29]), &y).unwrap();
        use rand::Rng;
        for rep in 0..10 {
            let theta_u = DVector::from_fn(fit.dim_theta(), |i, _| {
                let base = fit.unconstrain(&tc).unwrap()[i];
                base + rng.random_range(-0.3..0.3)
            });
            let x = StatePath::from_fn(2, 5, |_, _| rng.random_range(-1.0..1.5));
            let analytic = fit.log_joint_grad(&theta_u, &x, &y);
            let numeric = central_diff_grad(&theta_u, 1e-5, |tu| fit.log_joint(tu, &x, &y));
            for i in 0..fit.dim_theta() {
                let denom = numeric[i].abs().max(1.0);
                assert!(
                    ((analytic[i] - numeric[i]) / denom).abs() < 1e-5,
                    "rep {rep}, coord {i}: {} vs {}",
                    analytic[i],
                    numeric[i]
                );
            }
        }
    }

    #[test]
    fn log_joint_grad_matches_finite_differences_stationary_x0() {
        let m = two_asset_model();
        let tc = true_theta(&m);
        let mut rng = rng_from_seed(29);
        let (y, _) = m.simulate(&tc, 4, &mut rng).unwrap();
        let theta_u = m.unconstrain(&tc).unwrap();
        use rand::Rng;
        let x = StatePath::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.5));
        let analytic = m.log_joint_grad(&theta_u, &x, &y);
        let numeric = central_diff_grad(&theta_u, 1e-5, |tu| m.log_joint(tu, &x, &y));
        for i in 0..m.dim_theta() {
            let denom = numeric[i].abs().max(1.0);
            assert!(
                ((analytic[i] - numeric[i]) / denom).abs() < 1e-5,
                "coord {i}: {} vs {}",
                analytic[i],
                numeric[i]
            );
        }
    }

    #[test]
    fn prior_blocks() {
        let m = two_asset_model();
        // x_bar prior block is -x_bar/100.
        let mut theta_u = DVector::zeros(m.dim_theta());
        theta_u[m.off_xbar()] = 3.0;
        let g = m.log_prior_grad(&theta_u);
        assert!((g[m.off_xbar()] + 3.0 / 100.0).abs() < 1e-14);
        // kappa prior block vanishes at kappa = 1/2 (logit zero).
        assert_eq!(g[m.off_kappa()], 0.0);
        // Full prior gradient matches finite differences (Jeffreys block included).
        let theta_u = m.unconstrain(&true_theta(&m)).unwrap();
        let g = m.log_prior_grad(&theta_u);
        let numeric = central_diff_grad(&theta_u, 1e-6, |tu| m.log_prior(tu));
        for i in 0..m.dim_theta() {
            assert!((g[i] - numeric[i]).abs() < 1e-7, "coord {i}");
        }
    }

    #[test]
    fn state_grad_matches_finite_differences() {
        let m = two_asset_model();
        let tc = true_theta(&m);
        let mut rng = rng_from_seed(4);
        let (y, _) = m.simulate(&tc, 6, &mut rng).unwrap();
        let fit = SkellamModel::for_data(SkellamSpec::new(2, 30, [0, 6, 15, 29]), &y).unwrap();
        let theta_u = fit.unconstrain(&tc).unwrap();
        use rand::Rng;
        let x = StatePath::from_fn(2, 6, |_, _| rng.random_range(-1.0..1.5));
        let grad = fit.state_grad(&theta_u, &x, &y).unwrap();
        let theta_cc = fit.constrain(&theta_u);
        for t in 0..6 {
            for i in 0..2 {
                let h = 1e-6;
                let mut xp = x.clone();
                xp[(i, t)] += h;
                let up = fit.log_likelihood_given_states(&theta_cc, &xp, &y);
                xp[(i, t)] -= 2.0 * h;
                let dn = fit.log_likelihood_given_states(&theta_cc, &xp, &y);
                let numeric = (up - dn) / (2.0 * h);
                let a = grad[t * 2 + i];
                assert!(
                    (a - numeric).abs() / numeric.abs().max(1.0) < 1e-5,
                    "t {t} i {i}: {a} vs {numeric}"
                );
            }
        }
        // Last-period element has no look-ahead: changing x at T only moves
        // gradient entries at T-1 and T.
        let mut x2 = x.clone();
        x2[(0, 5)] += 0.5;
        let grad2 = fit.state_grad(&theta_u, &x2, &y).unwrap();
        for t in 0..4 {
            for i in 0..2 {
                assert_eq!(grad[t * 2 + i], grad2[t * 2 + i]);
            }
        }
    }

    #[test]
    fn simulation_deterministic_and_integer_valued() {
        let m = two_asset_model();
        let tc = true_theta(&m);
        let (y1, x1) = m.simulate(&tc, 40, &mut rng_from_seed(7)).unwrap();
        let (y2, x2) = m.simulate(&tc, 40, &mut rng_from_seed(7)).unwrap();
        assert_eq!(y1.matrix(), y2.matrix());
        assert_eq!(x1, x2);
        for v in y1.matrix().iter() {
            assert_eq!(*v, v.round());
        }
    }

    #[test]
    fn dlog_meas_dx_matches_finite_differences() {
        for &(y, sig2, kappa) in &[
            (0i64, 0.8f64, 0.3f64),
            (2, 1.5, 0.1),
            (-4, 6.0, 0.0),
            (1, 20.0, 0.5),
            (12, 3.0, 0.2),
        ] {
            let f = |lv: f64| {
                let p = skellam_pmf(y, lv.exp(), kappa).unwrap();
                p.max(f64::MIN_POSITIVE).ln()
            };
            let l0 = sig2.ln();
            let h = 1e-6;
            let numeric = (f(l0 + h) - f(l0 - h)) / (2.0 * h);
            let analytic = dlog_meas_dx(y, sig2, kappa);
            assert!(
                (analytic - numeric).abs() < 1e-5 * numeric.abs().max(1.0),
                "y {y} sig2 {sig2} kappa {kappa}: {analytic} vs {numeric}"
            );
        }
    }
}

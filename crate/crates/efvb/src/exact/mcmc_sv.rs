//! Gibbs sampler for the stochastic volatility model.
//!
//! Sampling scheme per sweep:
//!   1. states `x` given `(theta, y)` via the log-chi-squared mixture
//!      linearization and the tridiagonal precision sampler,
//!   2. `x_bar` from its closed-form Gaussian conditional,
//!   3. `sigma^2` from its inverse-gamma conditional (stationary first-period
//!      term included in the rate),
//!   4. `rho` by Metropolis-Hastings with the Gaussian conditional of the
//!      `t >= 2` likelihood part as proposal, accepted against the stationary
//!      first-period term and the uniform prior bounds.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::Dataset;
use crate::draws::{DrawSet, StateAccumulator, StateSummary};
use crate::error::{Error, Result};
use crate::exact::ksc::{ksc_mixture, MixtureApprox};
use crate::exact::precision::SymTridiag;
use crate::model::StatePath;
use crate::rng::rng_from_seed;

/// Offset inside `log(y^2 + eps)` guarding exact zeros.
const LOG_Y2_OFFSET: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct McmcSvConfig {
    pub burnin: usize,
    pub draws: usize,
    /// Inverse gamma prior shape/rate on `sigma^2`.
    pub prior_alpha: f64,
    pub prior_beta: f64,
    /// 1-based start of the state window kept for posterior correlations.
    pub state_window_start: usize,
}

impl Default for McmcSvConfig {
    fn default() -> Self {
        McmcSvConfig {
            burnin: 10_000,
            draws: 10_000,
            prior_alpha: 1.001,
            prior_beta: 1.001,
            state_window_start: 101,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McmcSvOutput {
    pub draws: DrawSet,
    pub states: StateSummary,
    pub rho_accept_rate: f64,
    pub wall_seconds: f64,
}

/// AR(1) prior precision of the state block (stationary first period) and
/// the corresponding linear term `Q * (x_bar 1)`.
fn ar1_precision(rho: f64, sigma2: f64, xbar: f64, t_len: usize) -> (SymTridiag, DVector<f64>) {
    let mut diag = vec![(1.0 + rho * rho) / sigma2; t_len];
    diag[0] = 1.0 / sigma2;
    diag[t_len - 1] = 1.0 / sigma2;
    if t_len == 1 {
        diag[0] = (1.0 - rho * rho) / sigma2;
    }
    let off = vec![-rho / sigma2; t_len.saturating_sub(1)];
    let mut b = DVector::from_element(t_len, xbar * (1.0 - rho) * (1.0 - rho) / sigma2);
    if t_len == 1 {
        b[0] = xbar * (1.0 - rho * rho) / sigma2;
    } else {
        b[0] = xbar * (1.0 - rho) / sigma2;
        b[t_len - 1] = xbar * (1.0 - rho) / sigma2;
    }
    (SymTridiag { diag, off }, b)
}

/// One draw of the state path given mixture indicators.
pub fn draw_states_given_indicators(
    y_star: &DVector<f64>,
    indicators: &[usize],
    mix: &MixtureApprox,
    xbar: f64,
    rho: f64,
    sigma2: f64,
    rng: &mut ChaCha12Rng,
) -> Result<DVector<f64>> {
    let t_len = y_star.len();
    let (mut prec, mut b) = ar1_precision(rho, sigma2, xbar, t_len);
    for t in 0..t_len {
        let j = indicators[t];
        prec.diag[t] += 1.0 / mix.vars[j];
        b[t] += (y_star[t] - mix.means[j]) / mix.vars[j];
    }
    let chol = prec.cholesky()?;
    let mean = chol.solve(&b);
    Ok(chol.sample_around(&mean, rng))
}

/// Gaussian conditional of `x_bar` given everything else.
pub fn xbar_conditional(x: &DVector<f64>, rho: f64, sigma2: f64) -> (f64, f64) {
    let t_len = x.len();
    let var = 1.0
        / (1.0 / 1000.0
            + ((t_len as f64 - 1.0) * (1.0 - rho) * (1.0 - rho) + (1.0 - rho * rho)) / sigma2);
    let mut acc = (1.0 - rho * rho) * x[0] / sigma2;
    for t in 1..t_len {
        acc += (1.0 - rho) * (x[t] - rho * x[t - 1]) / sigma2;
    }
    (var * acc, var)
}

/// Shape and rate of the inverse-gamma conditional of `sigma^2`.
pub fn sigma2_conditional(
    x: &DVector<f64>,
    xbar: f64,
    rho: f64,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    let t_len = x.len();
    let mut rate = (x[0] - xbar) * (x[0] - xbar) * (1.0 - rho * rho);
    for t in 1..t_len {
        let resid = x[t] - rho * x[t - 1] - xbar * (1.0 - rho);
        rate += resid * resid;
    }
    (alpha + t_len as f64 / 2.0, beta + 0.5 * rate)
}

/// Internal state-sampling machinery shared with the hybrid variational
/// method: log-squared data, a current path, and one refresh step of
/// indicators followed by states.
#[derive(Debug, Clone)]
pub struct KscStateSampler {
    y_star: DVector<f64>,
    mix: MixtureApprox,
    x: DVector<f64>,
}

impl KscStateSampler {
    pub fn new(y: &Dataset) -> Result<Self> {
        if y.dim() != 1 {
            return Err(Error::Dimension("SV state sampler expects one series".into()));
        }
        let t_len = y.len();
        let y_star = DVector::from_fn(t_len, |t, _| {
            let v = y.at(t + 1)[0];
            (v * v + LOG_Y2_OFFSET).ln()
        });
        let x = y_star.map(|v| v - crate::exact::ksc::LOG_CHI2_MEAN);
        Ok(KscStateSampler {
            y_star,
            mix: ksc_mixture(),
            x,
        })
    }

    pub fn y_star(&self) -> &DVector<f64> {
        &self.y_star
    }

    /// Draw indicators given the current path, then a new path given the
    /// indicators. Returns the refreshed path.
    pub fn refresh(
        &mut self,
        xbar: f64,
        rho: f64,
        sigma2: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<DVector<f64>> {
        let t_len = self.y_star.len();
        let mut indicators = vec![0usize; t_len];
        for t in 0..t_len {
            indicators[t] = self.mix.draw_indicator(self.y_star[t] - self.x[t], rng);
        }
        self.x = draw_states_given_indicators(
            &self.y_star,
            &indicators,
            &self.mix,
            xbar,
            rho,
            sigma2,
            rng,
        )?;
        Ok(self.x.clone())
    }

    /// Current path as a one-row state matrix.
    pub fn current_path(&self) -> StatePath {
        StatePath::from_fn(1, self.x.len(), |_, t| self.x[t])
    }
}

/// Full Gibbs run; draws of `(x_bar, rho, sigma, sigma2)` plus state
/// posterior summaries.
pub fn mcmc_sv(y: &Dataset, config: &McmcSvConfig, seed: u64) -> Result<McmcSvOutput> {
    let start_time = std::time::Instant::now();
    let t_len = y.len();
    let mut rng = rng_from_seed(seed);
    let mut sampler = KscStateSampler::new(y)?;

    // Method-of-moments style starting point.
    let mut xbar = y.series_variance(0).max(1e-12).ln();
    let mut rho = 0.9f64;
    let mut sigma2 = 0.1f64;

    let total = config.burnin + config.draws;
    let mut param_rows = nalgebra::DMatrix::zeros(config.draws, 4);
    let mut states = StateAccumulator::new(1, t_len, 0, config.state_window_start, 11);
    let mut rho_accepts = 0usize;

    for sweep in 0..total {
        // Step 1: states.
        let x = sampler.refresh(xbar, rho, sigma2, &mut rng)?;

        // Step 2: x_bar.
        let (m, v) = xbar_conditional(&x, rho, sigma2);
        let z: f64 = StandardNormal.sample(&mut rng);
        xbar = m + v.sqrt() * z;

        // Step 3: sigma^2.
        let (shape, rate) = sigma2_conditional(&x, xbar, rho, config.prior_alpha, config.prior_beta);
        let gamma = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::Config(format!("gamma draw: {e}")))?;
        sigma2 = 1.0 / gamma.sample(&mut rng);

        // Step 4: rho.
        let mut sum_sq = 0.0;
        let mut sum_cross = 0.0;
        for t in 1..t_len {
            sum_sq += (x[t - 1] - xbar) * (x[t - 1] - xbar);
            sum_cross += (x[t] - xbar) * (x[t - 1] - xbar);
        }
        if sum_sq > 0.0 {
            let s2_rho = sigma2 / sum_sq;
            let mu_rho = sum_cross / sum_sq;
            let z: f64 = StandardNormal.sample(&mut rng);
            let proposal = mu_rho + s2_rho.sqrt() * z;
            if proposal > 0.0 && proposal < 0.995 {
                let first = |r: f64| {
                    0.5 * (1.0 - r * r).ln()
                        - (x[0] - xbar) * (x[0] - xbar) * (1.0 - r * r) / (2.0 * sigma2)
                };
                let log_alpha = first(proposal) - first(rho);
                if rng.random::<f64>().ln() < log_alpha {
                    rho = proposal;
                    rho_accepts += 1;
                }
            }
        }

        if sweep >= config.burnin {
            let row = sweep - config.burnin;
            param_rows[(row, 0)] = xbar;
            param_rows[(row, 1)] = rho;
            param_rows[(row, 2)] = sigma2.sqrt();
            param_rows[(row, 3)] = sigma2;
            states.push(&sampler.current_path());
        }
    }

    let draws = DrawSet::new(
        vec!["x_bar".into(), "rho".into(), "sigma".into(), "sigma2".into()],
        param_rows,
    )?;
    Ok(McmcSvOutput {
        draws,
        states: states.finish(),
        rho_accept_rate: rho_accepts as f64 / total as f64,
        wall_seconds: start_time.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::kalman::kalman_smoother;
    use crate::exact::lgssm::LinearGaussianSystem;
    use crate::model::StateSpaceModel;
    use crate::models::sv::SvModel;

    #[test]
    fn xbar_conditional_limits() {
        // rho = 0, sigma = 1: variance -> 1/(1/1000 + T), mean -> sample mean.
        let t_len = 4000;
        let x = DVector::from_fn(t_len, |t, _| ((t % 7) as f64 - 3.0) * 0.5 + 0.3);
        let (m, v) = xbar_conditional(&x, 0.0, 1.0);
        let expected_v = 1.0 / (1.0 / 1000.0 + t_len as f64);
        assert!((v - expected_v).abs() < 1e-15);
        let sample_mean = x.sum() / t_len as f64;
        assert!((m - sample_mean).abs() < 1e-3, "{m} vs {sample_mean}");
    }

    #[test]
    fn state_step_matches_kalman_at_fixed_indicators() {
        // With all indicators pinned to one component the auxiliary model is
        // linear-Gaussian with constant observation noise, so the precision
        // sampler must reproduce the Kalman smoother moments.
        let model = SvModel::default();
        let theta = DVector::from_vec(vec![-1.0, 0.9, 0.4]);
        let mut rng = rng_from_seed(31);
        let (y, _) = model.simulate(&theta, 60, &mut rng).unwrap();
        let sampler = KscStateSampler::new(&y).unwrap();
        let mix = ksc_mixture();
        let component = 4usize;
        let indicators = vec![component; 60];
        let (xbar, rho, sigma2) = (-1.0, 0.9, 0.16);

        let n_draws = 20_000;
        let mut mean = DVector::<f64>::zeros(60);
        let mut m2 = DVector::<f64>::zeros(60);
        for k in 0..n_draws {
            let d = draw_states_given_indicators(
                sampler.y_star(),
                &indicators,
                &mix,
                xbar,
                rho,
                sigma2,
                &mut rng,
            )
            .unwrap();
            for t in 0..60 {
                let delta = d[t] - mean[t];
                mean[t] += delta / (k + 1) as f64;
                m2[t] += delta * (d[t] - mean[t]);
            }
        }

        let sys = LinearGaussianSystem {
            h: 1.0,
            r: mix.vars[component],
            a: rho,
            c: xbar * (1.0 - rho),
            q: sigma2,
            m1: xbar,
            p1: sigma2 / (1.0 - rho * rho),
        };
        let shifted: Vec<Vec<f64>> = (0..60)
            .map(|t| vec![sampler.y_star()[t] - mix.means[component]])
            .collect();
        let y_shift = Dataset::from_rows(&shifted, vec!["y1".into()]).unwrap();
        let kalman = kalman_smoother(&sys, &y_shift).unwrap();
        for t in 0..60 {
            let var = m2[t] / n_draws as f64;
            let se = (kalman.smooth_var[t] / n_draws as f64).sqrt();
            assert!(
                (mean[t] - kalman.smooth_mean[t]).abs() < 5.0 * se,
                "mean t = {t}: {} vs {}",
                mean[t],
                kalman.smooth_mean[t]
            );
            assert!(
                (var - kalman.smooth_var[t]).abs() < 0.1 * kalman.smooth_var[t],
                "var t = {t}: {var} vs {}",
                kalman.smooth_var[t]
            );
        }
    }

    #[test]
    fn two_chains_agree() {
        let model = SvModel::default();
        let theta = DVector::from_vec(vec![-1.3, 0.95, 0.3]);
        let mut rng = rng_from_seed(100);
        let (y, _) = model.simulate(&theta, 300, &mut rng).unwrap();
        let config = McmcSvConfig {
            burnin: 2000,
            draws: 6000,
            ..Default::default()
        };
        let out1 = mcmc_sv(&y, &config, 1).unwrap();
        let out2 = mcmc_sv(&y, &config, 2).unwrap();
        for name in ["x_bar", "rho", "sigma"] {
            let c1 = out1.draws.column(name).unwrap();
            let c2 = out2.draws.column(name).unwrap();
            let m1 = c1.iter().sum::<f64>() / c1.len() as f64;
            let m2 = c2.iter().sum::<f64>() / c2.len() as f64;
            let se = batch_se(&c1).hypot(batch_se(&c2));
            assert!(
                (m1 - m2).abs() < 4.0 * se,
                "{name}: {m1} vs {m2} (se {se})"
            );
        }
    }

    fn batch_se(draws: &[f64]) -> f64 {
        let batch = 100;
        let n_batches = draws.len() / batch;
        let means: Vec<f64> = (0..n_batches)
            .map(|b| draws[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / n_batches as f64;
        let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
            / (n_batches as f64 - 1.0);
        (var / n_batches as f64).sqrt()
    }
}

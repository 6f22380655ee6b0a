//! State space model abstraction.
//!
//! A model provides a closed-form measurement log density and a state
//! transition in the exponential family,
//!
//! ```text
//! p(x_t | x_{t-1}, theta) = h(x_t) g(x_{t-1}, theta) exp(eta(x_{t-1}, theta)' T(x_t)),
//! ```
//!
//! together with priors, parameter transforms to the real line, and analytic
//! gradients of the augmented log posterior. Both shipped models (and the
//! linear-Gaussian test model) have Gaussian transitions, so the trait exposes
//! the conditional mean and precision directly and derives the
//! exponential-family pieces from them; a non-Gaussian transition can override
//! the component functions.
//!
//! Time indices are 1-based: `t = 1` refers to the initial state distribution
//! `p(x_1 | theta)` (models with a fixed pre-sample state `x_0` fold it into
//! their `t = 1` moments).

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand_chacha::ChaCha12Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Latent state path, column-per-time (`state_dim x T`).
pub type StatePath = DMatrix<f64>;

/// Gaussian transition moments at a given time: precision matrix and the log
/// determinant of the implied covariance.
#[derive(Debug, Clone)]
pub struct GaussPrecision {
    pub precision: DMatrix<f64>,
    pub log_det_cov: f64,
}

impl GaussPrecision {
    /// Univariate helper from a variance.
    pub fn from_variance(var: f64) -> Self {
        GaussPrecision {
            precision: DMatrix::from_element(1, 1, 1.0 / var),
            log_det_cov: var.ln(),
        }
    }
}

pub trait StateSpaceModel: Send + Sync {
    fn name(&self) -> &str;

    /// Observation dimension `N`.
    fn dim_obs(&self) -> usize;

    /// State dimension per time point.
    fn dim_state(&self) -> usize;

    /// Parameter dimension `d`.
    fn dim_theta(&self) -> usize;

    /// Constrained-scale parameter names, in vector order.
    fn theta_names(&self) -> Vec<String>;

    /// Map a constrained parameter vector to the real line.
    ///
    /// Errors if the input violates the constrained domain.
    fn unconstrain(&self, theta_c: &DVector<f64>) -> Result<DVector<f64>>;

    /// Inverse of [`unconstrain`](Self::unconstrain).
    fn constrain(&self, theta_u: &DVector<f64>) -> DVector<f64>;

    /// `log p(y_t | x_t, theta)` with `theta` on the constrained scale.
    fn measurement_logdensity(
        &self,
        t: usize,
        y_t: DVectorView<'_, f64>,
        x_t: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
    ) -> f64;

    /// Conditional mean of `x_t | x_{t-1}` written into `out`. At `t = 1` the
    /// model's initial-state convention applies and `x_prev` is ignored.
    fn transition_mean_into(
        &self,
        t: usize,
        x_prev: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
        out: &mut DVector<f64>,
    );

    /// Conditional precision of `x_t | x_{t-1}` (state-independent).
    fn transition_precision(&self, t: usize, theta_c: &DVector<f64>) -> GaussPrecision;

    /// Log prior of the unconstrained parameters, transform Jacobians
    /// absorbed.
    fn log_prior(&self, theta_u: &DVector<f64>) -> f64;

    /// Gradient of [`log_prior`](Self::log_prior).
    fn log_prior_grad(&self, theta_u: &DVector<f64>) -> DVector<f64>;

    /// Gradient of `log p(y, x | theta) p(theta)` with respect to the
    /// unconstrained parameters.
    fn log_joint_grad(&self, theta_u: &DVector<f64>, x: &StatePath, y: &Dataset)
        -> DVector<f64>;

    /// Gradient of `log p(y | x, theta) p(x | theta)` with respect to the
    /// stacked state path (length `T * dim_state`), where supported.
    fn state_grad(
        &self,
        _theta_u: &DVector<f64>,
        _x: &StatePath,
        _y: &Dataset,
    ) -> Option<DVector<f64>> {
        None
    }

    /// Draw one observation vector `y_t | x_t`.
    fn simulate_measurement(
        &self,
        t: usize,
        x_t: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
        rng: &mut ChaCha12Rng,
    ) -> DVector<f64>;

    /// Check that a constrained parameter vector can be used for simulation.
    /// Boundary values that the bijective transform excludes (for the SV
    /// model, `sigma = 0` or `rho = 0`) are allowed here.
    fn check_simulation_domain(&self, theta_c: &DVector<f64>) -> Result<()>;

    /// Method-of-moments style starting point on the constrained scale.
    fn default_init(&self, y: &Dataset) -> DVector<f64>;

    /// Rough state path guess used to initialize state-block approximations.
    fn initial_state_guess(&self, y: &Dataset) -> StatePath {
        StatePath::zeros(self.dim_state(), y.len())
    }

    /// Fix the constrained parameters for repeated density evaluations.
    /// Models with expensive parameter unpacking override this.
    fn prepare<'a>(&'a self, theta_c: &DVector<f64>) -> Box<dyn PreparedModel + 'a> {
        Box::new(DefaultPrepared {
            model: self.as_dyn(),
            theta_c: theta_c.clone(),
        })
    }

    /// Object-safe self upcast used by the default [`prepare`](Self::prepare).
    fn as_dyn(&self) -> &dyn StateSpaceModel;

    // --- Exponential-family transition components -------------------------
    //
    // Defaults derive h, g, eta, T from the Gaussian moments:
    //   h(x) = 1,
    //   g    = (2 pi)^{-n/2} |Sigma|^{-1/2} exp(-m' P m / 2),
    //   eta  = (P m, -vec(P) / 2),
    //   T(x) = (x, vec(x x')).

    /// Sufficient statistic `T(x)`.
    fn suff_stat(&self, x: DVectorView<'_, f64>) -> DVector<f64> {
        let n = x.len();
        let mut out = DVector::zeros(n + n * n);
        out.rows_mut(0, n).copy_from(&x);
        for j in 0..n {
            for i in 0..n {
                out[n + j * n + i] = x[i] * x[j];
            }
        }
        out
    }

    /// `log h(x_t)`.
    fn log_h(&self, _x: DVectorView<'_, f64>) -> f64 {
        0.0
    }

    /// `log g(x_{t-1}, theta)`.
    fn log_g(&self, t: usize, x_prev: DVectorView<'_, f64>, theta_c: &DVector<f64>) -> f64 {
        let n = self.dim_state();
        let gp = self.transition_precision(t, theta_c);
        let mut mean = DVector::zeros(n);
        self.transition_mean_into(t, x_prev, theta_c, &mut mean);
        let quad = (&gp.precision * &mean).dot(&mean);
        -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * gp.log_det_cov - 0.5 * quad
    }

    /// Natural parameter `eta(x_{t-1}, theta)`, matching `suff_stat`.
    fn nat_param(
        &self,
        t: usize,
        x_prev: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
    ) -> DVector<f64> {
        let n = self.dim_state();
        let gp = self.transition_precision(t, theta_c);
        let mut mean = DVector::zeros(n);
        self.transition_mean_into(t, x_prev, theta_c, &mut mean);
        let pm = &gp.precision * &mean;
        let mut out = DVector::zeros(n + n * n);
        out.rows_mut(0, n).copy_from(&pm);
        for j in 0..n {
            for i in 0..n {
                out[n + j * n + i] = -0.5 * gp.precision[(i, j)];
            }
        }
        out
    }

    /// `log p(x_t | x_{t-1}, theta)` assembled from the exponential-family
    /// decomposition.
    fn transition_logdensity(
        &self,
        t: usize,
        x_t: DVectorView<'_, f64>,
        x_prev: DVectorView<'_, f64>,
        theta_c: &DVector<f64>,
    ) -> f64 {
        self.log_h(x_t)
            + self.log_g(t, x_prev, theta_c)
            + self.nat_param(t, x_prev, theta_c).dot(&self.suff_stat(x_t))
    }

    // --- Derived whole-path quantities -------------------------------------

    /// `log p(y, x | theta) p(theta)` with `theta` unconstrained.
    fn log_joint(&self, theta_u: &DVector<f64>, x: &StatePath, y: &Dataset) -> f64 {
        let theta_c = self.constrain(theta_u);
        self.log_prior(theta_u) + self.log_likelihood_given_states(&theta_c, x, y)
    }

    /// `log p(y | x, theta) p(x | theta)` with `theta` constrained.
    fn log_likelihood_given_states(
        &self,
        theta_c: &DVector<f64>,
        x: &StatePath,
        y: &Dataset,
    ) -> f64 {
        let t_len = y.len();
        let n = self.dim_state();
        let mut total = 0.0;
        let mut mean = DVector::zeros(n);
        let mut prev = DVector::zeros(n);
        let mut resid = DVector::zeros(n);
        for t in 1..=t_len {
            let x_t = x.column(t - 1);
            total += self.measurement_logdensity(t, y.at(t), x_t, theta_c);
            let gp = self.transition_precision(t, theta_c);
            self.transition_mean_into(t, prev.column(0), theta_c, &mut mean);
            resid.copy_from(&x_t);
            resid -= &mean;
            let quad = (&gp.precision * &resid).dot(&resid);
            total += -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln()
                - 0.5 * gp.log_det_cov
                - 0.5 * quad;
            prev.copy_from(&x_t);
        }
        total
    }

    /// Simulate a dataset and state path of length `t_len`. Deterministic
    /// given the generator state.
    fn simulate(
        &self,
        theta_c: &DVector<f64>,
        t_len: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<(Dataset, StatePath)> {
        self.check_simulation_domain(theta_c)?;
        if t_len == 0 {
            return Err(Error::Dimension("simulation needs T >= 1".into()));
        }
        let n = self.dim_state();
        let mut x = StatePath::zeros(n, t_len);
        let mut y = DMatrix::zeros(self.dim_obs(), t_len);
        let mut mean = DVector::zeros(n);
        let mut prev = DVector::zeros(n);
        for t in 1..=t_len {
            let gp = self.transition_precision(t, theta_c);
            self.transition_mean_into(t, prev.column(0), theta_c, &mut mean);
            let draw = sample_gaussian_with_precision(&mean, &gp.precision, rng)?;
            x.set_column(t - 1, &draw);
            let y_t = self.simulate_measurement(t, x.column(t - 1), theta_c, rng);
            y.set_column(t - 1, &y_t);
            prev.copy_from(&draw);
        }
        let names = (0..self.dim_obs()).map(|i| format!("y{}", i + 1)).collect();
        Ok((Dataset::new(y, names)?, x))
    }
}

/// Density evaluations at a fixed constrained parameter vector, for hot
/// loops (particle filtering, state-approximation calibration).
pub trait PreparedModel: Send + Sync {
    fn measurement_logdensity(&self, t: usize, y_t: DVectorView<'_, f64>, x_t: DVectorView<'_, f64>) -> f64;

    fn transition_mean_into(&self, t: usize, x_prev: DVectorView<'_, f64>, out: &mut DVector<f64>);

    fn transition_precision(&self, t: usize) -> GaussPrecision;

    /// Whether the transition precision is the same for every `t >= 2`
    /// (true for all shipped models), letting callers cache its factorization.
    fn precision_constant_after_first(&self) -> bool {
        true
    }
}

struct DefaultPrepared<'a> {
    model: &'a dyn StateSpaceModel,
    theta_c: DVector<f64>,
}

impl PreparedModel for DefaultPrepared<'_> {
    fn measurement_logdensity(
        &self,
        t: usize,
        y_t: DVectorView<'_, f64>,
        x_t: DVectorView<'_, f64>,
    ) -> f64 {
        self.model.measurement_logdensity(t, y_t, x_t, &self.theta_c)
    }

    fn transition_mean_into(
        &self,
        t: usize,
        x_prev: DVectorView<'_, f64>,
        out: &mut DVector<f64>,
    ) {
        self.model.transition_mean_into(t, x_prev, &self.theta_c, out)
    }

    fn transition_precision(&self, t: usize) -> GaussPrecision {
        self.model.transition_precision(t, &self.theta_c)
    }
}

/// Draw `N(mean, P^{-1})` via the Cholesky factor of the precision `P`:
/// `x = mean + L^{-T} xi`. Degenerate (infinite-precision) univariate
/// transitions return the mean.
pub fn sample_gaussian_with_precision(
    mean: &DVector<f64>,
    precision: &DMatrix<f64>,
    rng: &mut ChaCha12Rng,
) -> Result<DVector<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    if precision.nrows() == 1 && precision[(0, 0)].is_infinite() {
        return Ok(mean.clone());
    }
    let chol = nalgebra::Cholesky::new(precision.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("transition precision".into()))?;
    let n = mean.len();
    let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let mut z = xi;
    chol.l().transpose().solve_upper_triangular_mut(&mut z);
    Ok(mean + z)
}

/// Builder signature for registry entries: receives the dataset the model
/// will be fitted to (or `None` when building for simulation) plus free-form
/// options, and returns a ready model.
pub type ModelBuilder =
    Arc<dyn Fn(Option<&Dataset>, &ModelOptions) -> Result<Arc<dyn StateSpaceModel>> + Send + Sync>;

/// Free-form per-model options passed from config files.
#[derive(Debug, Clone, Default)]
pub struct ModelOptions {
    pub values: BTreeMap<String, serde_json::Value>,
}

impl ModelOptions {
    pub fn get_usize(&self, key: &str) -> Option<usize> {
        self.values.get(key).and_then(|v| v.as_u64()).map(|v| v as usize)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(|v| v.as_f64())
    }

    pub fn get_usize_list(&self, key: &str) -> Option<Vec<usize>> {
        self.values.get(key).and_then(|v| v.as_array()).map(|arr| {
            arr.iter()
                .filter_map(|x| x.as_u64())
                .map(|x| x as usize)
                .collect()
        })
    }

    pub fn get_f64_list(&self, key: &str) -> Option<Vec<f64>> {
        self.values
            .get(key)
            .and_then(|v| v.as_array())
            .map(|arr| arr.iter().filter_map(|x| x.as_f64()).collect())
    }
}

/// Registry keyed by model name so configuration files can select models
/// without code changes.
pub struct Registry {
    builders: BTreeMap<String, ModelBuilder>,
}

impl Registry {
    pub fn new() -> Self {
        Registry {
            builders: BTreeMap::new(),
        }
    }

    /// Registry with the shipped models ("sv", "skellam").
    pub fn with_defaults() -> Self {
        let mut reg = Registry::new();
        crate::models::register_defaults(&mut reg);
        reg
    }

    pub fn register(&mut self, name: &str, builder: ModelBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<String> {
        self.builders.keys().cloned().collect()
    }

    /// Build a model for fitting `data`.
    pub fn build(
        &self,
        name: &str,
        data: Option<&Dataset>,
        options: &ModelOptions,
    ) -> Result<Arc<dyn StateSpaceModel>> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
        builder(data, options)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

//! Bootstrap particle filter: propagate from the transition, weight by the
//! measurement density, resample every step. Returns the log of the unbiased
//! likelihood estimate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{GaussPrecision, StateSpaceModel};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resampling {
    /// Independent categorical draws each step (the default bootstrap form).
    Multinomial,
    /// Stratified positions from a single uniform.
    Systematic,
}

#[derive(Debug, Clone)]
pub struct PfResult {
    pub log_likelihood: f64,
    /// Set when every weight underflowed at some step; the estimate is then
    /// minus infinity.
    pub degenerate: bool,
}

/// Draws from a Gaussian transition given its precision; an infinite
/// univariate precision collapses to the mean.
enum TransitionDraw {
    Deterministic,
    Chol(Cholesky<f64, Dyn>),
}

impl TransitionDraw {
    fn build(gp: &GaussPrecision) -> Result<Self> {
        if gp.precision.nrows() == 1 && gp.precision[(0, 0)].is_infinite() {
            return Ok(TransitionDraw::Deterministic);
        }
        Cholesky::new(gp.precision.clone())
            .map(TransitionDraw::Chol)
            .ok_or_else(|| Error::NotPositiveDefinite("transition precision".into()))
    }

    fn perturb(&self, x: &mut DVector<f64>, rng: &mut ChaCha12Rng) {
        if let TransitionDraw::Chol(chol) = self {
            let n = x.len();
            let mut xi = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            chol.l().transpose().solve_upper_triangular_mut(&mut xi);
            *x += xi;
        }
    }
}

/// Log of the bootstrap filter likelihood estimate with `n_particles`
/// particles. Deterministic given the seed.
pub fn bootstrap_pf_loglik(
    model: &dyn StateSpaceModel,
    theta_c: &DVector<f64>,
    y: &Dataset,
    n_particles: usize,
    seed: u64,
    resampling: Resampling,
) -> Result<PfResult> {
    if n_particles == 0 {
        return Err(Error::Config("need at least one particle".into()));
    }
    let prepared = model.prepare(theta_c);
    let n = model.dim_state();
    let t_len = y.len();
    let mut rng = rng_from_seed(seed);

    let draw_first = TransitionDraw::build(&prepared.transition_precision(1))?;
    let draw_rest = if t_len > 1 {
        Some(TransitionDraw::build(&prepared.transition_precision(2))?)
    } else {
        None
    };
    let time_constant = prepared.precision_constant_after_first();

    let mut particles = DMatrix::zeros(n, n_particles);
    let mut resampled = DMatrix::zeros(n, n_particles);
    let mut log_weights = vec![0.0f64; n_particles];
    let mut weights = vec![0.0f64; n_particles];
    let mut mean = DVector::zeros(n);
    let mut loglik = 0.0;

    for t in 1..=t_len {
        let per_t_draw;
        let drawer: &TransitionDraw = if t == 1 {
            &draw_first
        } else if time_constant {
            draw_rest.as_ref().unwrap()
        } else {
            per_t_draw = TransitionDraw::build(&prepared.transition_precision(t))?;
            &per_t_draw
        };
        let y_t = y.at(t);
        for p in 0..n_particles {
            prepared.transition_mean_into(t, particles.column(p), &mut mean);
            let mut x = mean.clone_owned();
            drawer.perturb(&mut x, &mut rng);
            particles.set_column(p, &x);
            log_weights[p] = prepared.measurement_logdensity(t, y_t, particles.column(p));
        }
        let max_lw = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max_lw.is_finite() {
            return Ok(PfResult {
                log_likelihood: f64::NEG_INFINITY,
                degenerate: true,
            });
        }
        let sum_exp: f64 = log_weights.iter().map(|lw| (lw - max_lw).exp()).sum();
        loglik += max_lw + sum_exp.ln() - (n_particles as f64).ln();
        let mut acc = 0.0;
        for p in 0..n_particles {
            acc += (log_weights[p] - max_lw).exp() / sum_exp;
            weights[p] = acc;
        }
        weights[n_particles - 1] = 1.0;

        match resampling {
            Resampling::Multinomial => {
                for p in 0..n_particles {
                    let u: f64 = rng.random();
                    let idx = weights.partition_point(|&w| w < u).min(n_particles - 1);
                    resampled.set_column(p, &particles.column(idx));
                }
            }
            Resampling::Systematic => {
                let u0: f64 = rng.random::<f64>() / n_particles as f64;
                let mut idx = 0usize;
                for p in 0..n_particles {
                    let u = u0 + p as f64 / n_particles as f64;
                    while weights[idx] < u {
                        idx += 1;
                    }
                    resampled.set_column(p, &particles.column(idx));
                }
            }
        }
        std::mem::swap(&mut particles, &mut resampled);
    }

    Ok(PfResult {
        log_likelihood: loglik,
        degenerate: false,
    })
}

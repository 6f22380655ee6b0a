//! Symmetric tridiagonal precision systems: Cholesky factorization, solves,
//! and Gaussian draws. This is the precision sampler used to generate full
//! state paths in the SV Gibbs sampler, where the conditional posterior of
//! the states has a tridiagonal precision matrix.

use nalgebra::DVector;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag` of length `n`, `off` of length `n-1`.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// Lower-bidiagonal Cholesky factor of a [`SymTridiag`].
#[derive(Debug, Clone)]
pub struct TridiagChol {
    d: Vec<f64>,
    e: Vec<f64>,
}

impl SymTridiag {
    pub fn cholesky(&self) -> Result<TridiagChol> {
        let n = self.diag.len();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut v = self.diag[i];
            if i > 0 {
                v -= e[i - 1] * e[i - 1];
            }
            if !(v > 0.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "tridiagonal pivot {i}"
                )));
            }
            d[i] = v.sqrt();
            if i + 1 < n {
                e[i] = self.off[i] / d[i];
            }
        }
        Ok(TridiagChol { d, e })
    }
}

impl TridiagChol {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Solve `L L' x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.len();
        let mut x = DVector::zeros(n);
        // Forward: L u = b.
        for i in 0..n {
            let mut v = b[i];
            if i > 0 {
                v -= self.e[i - 1] * x[i - 1];
            }
            x[i] = v / self.d[i];
        }
        // Backward: L' x = u.
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.e[i] * x[i + 1];
            }
            x[i] = v / self.d[i];
        }
        x
    }

    /// Draw from `N(mean, (L L')^{-1})` given the solved mean: adds
    /// `L'^{-1} xi` with standard normal `xi`.
    pub fn sample_around(&self, mean: &DVector<f64>, rng: &mut ChaCha12Rng) -> DVector<f64> {
        let n = self.len();
        let mut z = DVector::zeros(n);
        for i in 0..n {
            let xi: f64 = StandardNormal.sample(rng);
            z[i] = xi;
        }
        // Back substitution: L' v = xi.
        for i in (0..n).rev() {
            let mut v = z[i];
            if i + 1 < n {
                v -= self.e[i] * z[i + 1];
            }
            z[i] = v / self.d[i];
        }
        mean + z
    }

    pub fn log_det_precision(&self) -> f64 {
        2.0 * self.d.iter().map(|v| v.ln()).sum::<f64>()
    }
}

//! Intraday seasonal basis: natural cubic spline over one trading day with
//! four knots, transformed to a zero-sum basis so the volatility level stays
//! identified. The per-day basis repeats across days.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Zero-sum cubic-spline basis for one trading day.
#[derive(Debug, Clone)]
pub struct SeasonalBasis {
    /// `P x 3` matrix of basis values; row = intraday period.
    w_tilde: DMatrix<f64>,
}

impl SeasonalBasis {
    /// Build the basis on an intraday grid of `periods` points with four
    /// knots given as grid indices.
    ///
    /// The natural-spline basis is `(1, u, d_1(u) - d_3(u), d_2(u) - d_3(u))`
    /// with `d_k(u) = [(u - k_k)_+^3 - (u - k_4)_+^3] / (k_4 - k_k)`; the
    /// fourth column is then folded into the first three so every column sums
    /// to zero over the day.
    pub fn build(periods: usize, knots: [usize; 4]) -> Result<Self> {
        if periods < 4 {
            return Err(Error::Config("seasonal basis needs at least 4 periods".into()));
        }
        let mut sorted = knots;
        sorted.sort_unstable();
        if sorted != knots || knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("knots must be strictly increasing, got {knots:?}")));
        }
        if knots[3] >= periods {
            return Err(Error::Config(format!(
                "last knot {} outside the grid of {periods} periods",
                knots[3]
            )));
        }
        let scale = (periods - 1) as f64;
        let xi: Vec<f64> = knots.iter().map(|&k| k as f64 / scale).collect();
        let mut w = DMatrix::zeros(periods, 4);
        for t in 0..periods {
            let u = t as f64 / scale;
            let d = |k: usize| -> f64 {
                let plus = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
                (plus(u - xi[k]) - plus(u - xi[3])) / (xi[3] - xi[k])
            };
            w[(t, 0)] = 1.0;
            w[(t, 1)] = u;
            w[(t, 2)] = d(0) - d(2);
            w[(t, 3)] = d(1) - d(2);
        }
        let col_sums: Vec<f64> = (0..4).map(|j| w.column(j).sum()).collect();
        if col_sums[3].abs() < 1e-10 {
            return Err(Error::Config("degenerate knots: fourth basis column sums to zero".into()));
        }
        let mut w_tilde = DMatrix::zeros(periods, 3);
        for j in 0..3 {
            let ratio = col_sums[j] / col_sums[3];
            for t in 0..periods {
                w_tilde[(t, j)] = w[(t, j)] - w[(t, 3)] * ratio;
            }
        }
        Ok(SeasonalBasis { w_tilde })
    }

    /// Number of intraday periods.
    pub fn periods(&self) -> usize {
        self.w_tilde.nrows()
    }

    /// Basis row for absolute time index `t` (1-based), repeating daily.
    pub fn row(&self, t: usize) -> [f64; 3] {
        let r = (t - 1) % self.periods();
        [
            self.w_tilde[(r, 0)],
            self.w_tilde[(r, 1)],
            self.w_tilde[(r, 2)],
        ]
    }

    /// Seasonal value `w_tilde_t' beta` at absolute time `t` (1-based).
    pub fn seasonal(&self, t: usize, beta: &DVector<f64>) -> f64 {
        let row = self.row(t);
        row[0] * beta[0] + row[1] * beta[1] + row[2] * beta[2]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w_tilde
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_sum_to_zero() {
        let basis = SeasonalBasis::build(390, [2, 30, 200, 389]).unwrap();
        for j in 0..3 {
            let s: f64 = basis.matrix().column(j).sum();
            assert!(s.abs() < 1e-9, "column {j} sums to {s}");
        }
    }

    #[test]
    fn zero_coefficients_give_zero_seasonality() {
        let basis = SeasonalBasis::build(100, [0, 20, 60, 99]).unwrap();
        let beta = DVector::zeros(3);
        for t in 1..=250 {
            assert_eq!(basis.seasonal(t, &beta), 0.0);
        }
    }

    #[test]
    fn reproduces_shapes_in_the_spline_space() {
        // A target built from known coefficients is recovered by least
        // squares with near-zero residual.
        let basis = SeasonalBasis::build(130, [1, 25, 70, 129]).unwrap();
        let beta_true = DVector::from_vec(vec![0.8, -1.7, 2.4]);
        let target: DVector<f64> = basis.matrix() * &beta_true;
        let svd = basis.matrix().clone().svd(true, true);
        let beta_hat = svd.solve(&target, 1e-12).unwrap();
        let resid = basis.matrix() * &beta_hat - &target;
        assert!(resid.amax() < 1e-6, "max residual {}", resid.amax());
        for i in 0..3 {
            assert!((beta_hat[i] - beta_true[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(SeasonalBasis::build(100, [5, 5, 60, 99]).is_err());
        assert!(SeasonalBasis::build(100, [5, 4, 60, 99]).is_err());
        assert!(SeasonalBasis::build(100, [0, 20, 60, 120]).is_err());
    }

    #[test]
    fn repeats_across_days() {
        let basis = SeasonalBasis::build(50, [0, 10, 30, 49]).unwrap();
        let beta = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(basis.seasonal(3, &beta), basis.seasonal(53, &beta));
    }
}

//! Posterior draw containers shared by the VB samplers, MCMC, and PMCMC.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::StatePath;

/// Matrix of posterior draws with named columns (one row per draw).
#[derive(Debug, Clone)]
pub struct DrawSet {
    names: Vec<String>,
    data: DMatrix<f64>,
}

impl DrawSet {
    pub fn new(names: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if names.len() != data.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                data.ncols()
            )));
        }
        Ok(DrawSet { names, data })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name)
            .map(|j| self.data.column(j).iter().copied().collect())
    }

    pub fn column_mean(&self, name: &str) -> Option<f64> {
        self.column_index(name)
            .map(|j| self.data.column(j).sum() / self.len() as f64)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.names)?;
        for r in 0..self.data.nrows() {
            let row: Vec<String> = (0..self.data.ncols())
                .map(|c| self.data[(r, c)].to_string())
                .collect();
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let names: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::Config(format!("bad draw value: {e}")))?);
        }
        let ncols = names.len();
        let data = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        DrawSet::new(names, data)
    }
}

/// Streaming accumulator over sampled state paths: per-coordinate running
/// mean/variance plus full draws for a window of one series, kept for
/// posterior state correlations. Avoids materializing every path.
#[derive(Debug, Clone)]
pub struct StateAccumulator {
    dim: usize,
    t_len: usize,
    count: usize,
    mean: DMatrix<f64>,
    m2: DMatrix<f64>,
    window_series: usize,
    window_start: usize, // 1-based time of the first window state
    window: Vec<DVector<f64>>,
}

impl StateAccumulator {
    /// `window_start` is 1-based; the window covers
    /// `window_start .. window_start + window_len - 1` on `window_series`.
    pub fn new(
        dim: usize,
        t_len: usize,
        window_series: usize,
        window_start: usize,
        window_len: usize,
    ) -> Self {
        let start = window_start.min(t_len.saturating_sub(window_len).max(1));
        StateAccumulator {
            dim,
            t_len,
            count: 0,
            mean: DMatrix::zeros(dim, t_len),
            m2: DMatrix::zeros(dim, t_len),
            window_series,
            window_start: start,
            window: Vec::new(),
        }
    }

    pub fn push(&mut self, path: &StatePath) {
        self.count += 1;
        let c = self.count as f64;
        for t in 0..self.t_len {
            for i in 0..self.dim {
                let v = path[(i, t)];
                let delta = v - self.mean[(i, t)];
                self.mean[(i, t)] += delta / c;
                self.m2[(i, t)] += delta * (v - self.mean[(i, t)]);
            }
        }
        let w_len = self.window_len();
        let mut w = DVector::zeros(w_len);
        for k in 0..w_len {
            w[k] = path[(self.window_series, self.window_start - 1 + k)];
        }
        self.window.push(w);
    }

    fn window_len(&self) -> usize {
        11.min(self.t_len.saturating_sub(self.window_start - 1))
    }

    pub fn finish(self) -> StateSummary {
        let count = self.count.max(1);
        let var = self.m2.map(|v| v / count as f64);
        let w_len = self.window_len();
        let window = DMatrix::from_fn(self.count, w_len, |r, c| self.window[r][c]);
        StateSummary {
            mean: self.mean,
            var,
            draws: self.count,
            window_start: self.window_start,
            window,
        }
    }
}

/// Posterior summary of the latent states.
#[derive(Debug, Clone)]
pub struct StateSummary {
    /// Posterior mean per (series, time).
    pub mean: DMatrix<f64>,
    /// Posterior variance per (series, time).
    pub var: DMatrix<f64>,
    pub draws: usize,
    /// 1-based time of the first window column.
    pub window_start: usize,
    /// Draws for the correlation window (rows = draws).
    pub window: DMatrix<f64>,
}

impl StateSummary {
    /// Pairwise correlation matrix of the window states.
    pub fn window_correlations(&self) -> DMatrix<f64> {
        let n = self.window.nrows() as f64;
        let k = self.window.ncols();
        let means: Vec<f64> = (0..k).map(|j| self.window.column(j).sum() / n).collect();
        let mut cov = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let mut acc = 0.0;
                for r in 0..self.window.nrows() {
                    acc += (self.window[(r, a)] - means[a]) * (self.window[(r, b)] - means[b]);
                }
                cov[(a, b)] = acc / n;
                cov[(b, a)] = cov[(a, b)];
            }
        }
        let mut corr = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let denom = (cov[(a, a)] * cov[(b, b)]).sqrt();
                corr[(a, b)] = if denom > 0.0 { cov[(a, b)] / denom } else { f64::NAN };
            }
        }
        corr
    }

    /// Mean correlation between window states `lag` apart.
    pub fn lag_correlation(&self, lag: usize) -> f64 {
        let corr = self.window_correlations();
        let k = corr.nrows();
        if lag >= k {
            return f64::NAN;
        }
        let mut acc = 0.0;
        let mut count = 0;
        for a in 0..k - lag {
            acc += corr[(a, a + lag)];
            count += 1;
        }
        acc / count as f64
    }

    /// Write per-time posterior means and variances as CSV.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let dim = self.mean.nrows();
        let mut header = vec!["t".to_string()];
        for i in 1..=dim {
            header.push(format!("mean{i}"));
        }
        for i in 1..=dim {
            header.push(format!("var{i}"));
        }
        writer.write_record(&header)?;
        for t in 0..self.mean.ncols() {
            let mut row = vec![(t + 1).to_string()];
            for i in 0..dim {
                row.push(self.mean[(i, t)].to_string());
            }
            for i in 0..dim {
                row.push(self.var[(i, t)].to_string());
            }
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_direct_moments() {
        let mut acc = StateAccumulator::new(1, 5, 0, 1, 11);
        let paths = [
            StatePath::from_vec(1, 5, vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            StatePath::from_vec(1, 5, vec![2.0, 0.0, 3.0, 1.0, 9.0]),
            StatePath::from_vec(1, 5, vec![0.0, 1.0, 3.0, 7.0, 1.0]),
        ];
        for p in &paths {
            acc.push(p);
        }
        let summary = acc.finish();
        assert!((summary.mean[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((summary.var[(0, 2)] - 0.0).abs() < 1e-12);
        let direct_var = ((4.0f64 - 4.0).powi(2) + (1.0f64 - 4.0).powi(2) + (7.0f64 - 4.0).powi(2)) / 3.0;
        assert!((summary.var[(0, 3)] - direct_var).abs() < 1e-12);
        // Window covers all five states here.
        assert_eq!(summary.window.ncols(), 5);
    }

    #[test]
    fn drawset_roundtrip_and_lookup() {
        let ds = DrawSet::new(
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
        assert_eq!(ds.column_mean("a").unwrap(), 3.0);
        let dir = std::env::temp_dir().join("efvb-draws-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("draws.csv");
        ds.write_csv(&path).unwrap();
        let back = DrawSet::read_csv(&path).unwrap();
        assert_eq!(back.names(), ds.names());
        assert_eq!(back.matrix(), ds.matrix());
    }
}

//! Observed time series container and CSV ingestion.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An observed time series of `T` time points on `N` series.
///
/// Stored column-per-time: `y.column(t)` is the observation vector at time
/// `t` (0-based internally; the public API of models uses 1-based `t`).
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DMatrix<f64>,
    names: Vec<String>,
}

impl Dataset {
    /// Build from a column-per-time matrix (`N x T`).
    pub fn new(y: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if y.ncols() == 0 {
            return Err(Error::Dimension("dataset needs T >= 1".into()));
        }
        if names.len() != y.nrows() {
            return Err(Error::Dimension(format!(
                "{} series names for {} series",
                names.len(),
                y.nrows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
        Ok(Self { y, names })
    }

    /// Build from per-time rows (row `t` holds the `N` observations at `t`).
    pub fn from_rows(rows: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        let t_len = rows.len();
        let n = names.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows in dataset".into()));
        }
        let y = DMatrix::from_fn(n, t_len, |i, t| rows[t][i]);
        Self::new(y, names)
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.ncols() == 0
    }

    /// Number of series `N`.
    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Observation vector at 1-based time `t`.
    pub fn at(&self, t: usize) -> nalgebra::DVectorView<'_, f64> {
        self.y.column(t - 1)
    }

    /// Full `N x T` matrix, column per time.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Sample variance of series `i` (0-based), denominator `T`.
    pub fn series_variance(&self, i: usize) -> f64 {
        let row = self.y.row(i);
        let t_len = row.len() as f64;
        let mean = row.sum() / t_len;
        row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t_len
    }

    /// Read a dataset from a CSV file: header row with series names, one row
    /// per time point.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let names: Vec<String> = reader
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Config(format!("bad CSV value: {e}")))?;
            rows.push(row);
        }
        Self::from_rows(&rows, names)
    }

    /// Write the dataset as CSV (header + one row per time point).
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.names)?;
        for t in 0..self.len() {
            let row: Vec<String> = self.y.column(t).iter().map(|v| v.to_string()).collect();
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

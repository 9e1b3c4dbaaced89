//! Multivariate time series and the smoothing parameter.
//!
//! A series is a dense `p x n` matrix: `p` features observed at `n` time
//! steps, one column per step. Costs between two series compare columns,
//! so a pair only needs matching feature counts, never matching lengths.

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Smoothing parameter of the soft minimum. Zero recovers the hard minimum
/// and with it classic dynamic time warping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma(f64);

impl Gamma {
    /// Validates that the parameter is finite and nonnegative.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidGamma(value));
        }
        Ok(Gamma(value))
    }

    pub fn zero() -> Self {
        Gamma(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// A `p x n` time series: `p` features, `n` time steps, column-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Array2<f64>,
}

impl TimeSeries {
    /// Wraps a `p x n` matrix. Both dimensions must be positive and every
    /// entry finite.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (p, n) = values.dim();
        if p == 0 || n == 0 {
            return Err(Error::EmptyInput("time series"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series entries"));
        }
        Ok(TimeSeries { values })
    }

    /// Builds a single-feature series from a list of observations.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let array =
            Array2::from_shape_vec((1, n), values).expect("1 x n shape always matches length");
        TimeSeries::new(array)
    }

    /// Number of features `p`.
    pub fn num_features(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time steps `n`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Observation at time step `t` (a length-`p` column).
    pub fn column(&self, t: usize) -> ArrayView1<'_, f64> {
        self.values.column(t)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Resamples the series to `new_len` steps by linear interpolation along
    /// the time axis. A series resampled to its own length is returned
    /// unchanged, column for column.
    pub fn resampled(&self, new_len: usize) -> Result<TimeSeries> {
        if new_len == 0 {
            return Err(Error::EmptyInput("resample target length"));
        }
        let (p, n) = self.values.dim();
        let mut out = Array2::zeros((p, new_len));
        for t in 0..new_len {
            let position = if new_len == 1 {
                (n - 1) as f64 / 2.0
            } else {
                t as f64 * (n - 1) as f64 / (new_len - 1) as f64
            };
            let lo = position.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = position - lo as f64;
            for f in 0..p {
                let v = if frac == 0.0 {
                    self.values[[f, lo]]
                } else {
                    (1.0 - frac) * self.values[[f, lo]] + frac * self.values[[f, hi]]
                };
                out[[f, t]] = v;
            }
        }
        TimeSeries::new(out)
    }

    /// Splits the series at time step `t` into the first `t` columns and the
    /// remaining `n - t` columns.
    pub fn split_at_step(&self, t: usize) -> Result<(TimeSeries, TimeSeries)> {
        let n = self.len();
        if t == 0 || t >= n {
            return Err(Error::InvalidConfig(format!(
                "split point {t} must lie strictly inside a length-{n} series"
            )));
        }
        let (head, tail) = self.values.view().split_at(Axis(1), t);
        Ok((
            TimeSeries::new(head.to_owned())?,
            TimeSeries::new(tail.to_owned())?,
        ))
    }
}

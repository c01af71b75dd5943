//! Validated observations and recursive prefix-estimate sequences.

use std::io::BufRead;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Real-valued observations `x_1..x_n` with `n >= 2`, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    values: Vec<T>,
}

impl<T: Scalar> TimeSeries<T> {
    pub const MIN_LEN: usize = 2;

    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if values.len() < Self::MIN_LEN {
            return Err(Error::TooShort {
                n: values.len(),
                min: Self::MIN_LEN,
            });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_count(self.len())
    }

    /// Applies `x -> a x + b` to every observation.
    pub fn affine(&self, a: T, b: T) -> Result<Self> {
        Self::new(self.values.iter().map(|&x| a * x + b).collect())
    }

    /// Observations shifted by the full-sample mean; every estimator here that
    /// is location invariant works on this to avoid cancellation.
    pub(crate) fn centered(&self) -> Vec<T> {
        let m = self.mean();
        self.values.iter().map(|&x| x - m).collect()
    }
}

impl<T> Deref for TimeSeries<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.values
    }
}

/// Checks finiteness and length of raw observations.
pub fn validate_series<T: Scalar>(raw: &[T]) -> Result<TimeSeries<T>> {
    TimeSeries::new(raw.to_vec())
}

/// Reads one observation per line. Blank lines and lines starting with `#`
/// are skipped; on comma-separated lines the first field is used.
pub fn read_series<R: BufRead>(reader: R) -> Result<TimeSeries<f64>> {
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let field = trimmed.split(',').next().unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("not a number: {field:?}"),
        })?;
        values.push(v);
    }
    TimeSeries::new(values)
}

/// Recursive estimates `theta_t` for `t = first_valid..=n`, each a `q`-vector.
///
/// `t` counts raw observations, so `n` is the sample size the final estimate
/// was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSequence<T> {
    dim: usize,
    n: usize,
    first_valid: usize,
    data: Vec<T>,
}

impl<T: Scalar> EstimateSequence<T> {
    /// `data` holds the estimates row-major, one `dim`-vector per prefix.
    pub fn new(dim: usize, n: usize, first_valid: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("estimate dimension must be >= 1".into()));
        }
        if first_valid == 0 || first_valid > n {
            return Err(Error::InvalidArgument(format!(
                "first_valid {first_valid} outside 1..={n}"
            )));
        }
        let expected = (n - first_valid + 1) * dim;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i / dim + first_valid));
        }
        Ok(Self {
            dim,
            n,
            first_valid,
            data,
        })
    }

    pub fn from_scalars(n: usize, first_valid: usize, values: Vec<T>) -> Result<Self> {
        Self::new(1, n, first_valid, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sample size `N` of the final estimate.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first_valid(&self) -> usize {
        self.first_valid
    }

    pub fn valid_count(&self) -> usize {
        self.n - self.first_valid + 1
    }

    /// Estimate from the first `t` observations.
    pub fn get(&self, t: usize) -> Option<&[T]> {
        if t < self.first_valid || t > self.n {
            return None;
        }
        let i = (t - self.first_valid) * self.dim;
        Some(&self.data[i..i + self.dim])
    }

    /// Full-sample estimate `theta_N`.
    pub fn last(&self) -> &[T] {
        &self.data[self.data.len() - self.dim..]
    }

    /// `(t, theta_t)` pairs in increasing `t`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[T])> + '_ {
        self.data
            .chunks_exact(self.dim)
            .enumerate()
            .map(move |(i, c)| (i + self.first_valid, c))
    }

    /// Scalar view for `dim == 1`.
    pub fn scalars(&self) -> Option<&[T]> {
        (self.dim == 1).then_some(&self.data[..])
    }
}

//! Self-normalized inference from recursive estimates.
//!
//! The normalizer `W_N = N^{-2} sum_t t^2 (theta_t - theta_N)(theta_t - theta_N)'`
//! is proportional to, but not an estimate of, the long-run variance of
//! `theta_N`; the pivot `N (theta_N - theta)' W_N^{-1} (theta_N - theta)`
//! has the nuisance-free limit `U_q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;
use crate::series::EstimateSequence;

/// Confidence set obtained by inverting the pivot.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region<T> {
    Interval {
        lower: T,
        upper: T,
    },
    /// `{theta : (theta - center)' shape^{-1} (theta - center) <= radius_sq}`.
    Ellipsoid {
        center: Vec<T>,
        shape: SquareMatrix<T>,
        radius_sq: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfNormResult<T> {
    pub theta_hat: Vec<T>,
    pub w_matrix: SquareMatrix<T>,
    pub n_eff: usize,
    pub level: f64,
    pub critval: T,
    pub region: Region<T>,
}

impl<T: Scalar> SelfNormResult<T> {
    /// `N (theta_hat - theta)' W^{-1} (theta_hat - theta)`.
    pub fn pivot_at(&self, theta: &[T]) -> Result<T> {
        pivot_from(&self.w_matrix, &self.theta_hat, self.n_eff, theta)
    }

    pub fn contains(&self, theta: &[T]) -> Result<bool> {
        if self.critval.is_infinite() {
            return Ok(true);
        }
        Ok(self.pivot_at(theta)? <= self.critval)
    }

    /// `(lower, upper)` for scalar statistics.
    pub fn interval(&self) -> Option<(T, T)> {
        match self.region {
            Region::Interval { lower, upper } => Some((lower, upper)),
            Region::Ellipsoid { .. } => None,
        }
    }

    /// Interval length for scalar statistics.
    pub fn width(&self) -> Option<T> {
        self.interval().map(|(l, u)| u - l)
    }
}

/// Self-normalizer `W_N` over the valid prefixes of `seq`.
pub fn wn_matrix<T: Scalar>(seq: &EstimateSequence<T>) -> Result<SquareMatrix<T>> {
    if seq.valid_count() < 2 {
        return Err(Error::TooFewPrefixes);
    }
    let q = seq.dim();
    let n = T::from_count(seq.n());
    let last = seq.last();
    let mut w = SquareMatrix::zeros(q);
    let mut v = vec![T::zero(); q];
    for (t, theta) in seq.iter() {
        let r = T::from_count(t) / n;
        for j in 0..q {
            v[j] = r * (theta[j] - last[j]);
        }
        w.add_outer(&v, T::one());
    }
    Ok(w)
}

fn pivot_from<T: Scalar>(w: &SquareMatrix<T>, theta_hat: &[T], n: usize, theta0: &[T]) -> Result<T> {
    if theta0.len() != theta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_hat.len(),
            got: theta0.len(),
        });
    }
    let d: Vec<T> = theta_hat.iter().zip(theta0).map(|(&a, &b)| a - b).collect();
    let chol = w.cholesky()?;
    if d.iter().all(|v| v.is_zero()) {
        return Ok(T::zero());
    }
    Ok(T::from_count(n) * chol.inv_quadratic_form(&d))
}

/// `N (theta_N - theta0)' W_N^{-1} (theta_N - theta0)`.
pub fn sn_pivot<T: Scalar>(seq: &EstimateSequence<T>, theta0: &[T]) -> Result<T> {
    let w = wn_matrix(seq)?;
    pivot_from(&w, seq.last(), seq.n(), theta0)
}

fn check_critval<T: Scalar>(critval: T) -> Result<()> {
    if critval.is_nan() || critval < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "critical value must be >= 0, got {critval}"
        )));
    }
    Ok(())
}

/// Region `{theta : pivot(theta) <= critval}`; an interval when `q = 1`.
pub fn sn_region<T: Scalar>(
    seq: &EstimateSequence<T>,
    level: f64,
    critval: T,
) -> Result<SelfNormResult<T>> {
    check_critval(critval)?;
    let w = wn_matrix(seq)?;
    w.cholesky()?;
    let theta_hat = seq.last().to_vec();
    let n = seq.n();
    let region = if seq.dim() == 1 {
        let half = if critval.is_infinite() {
            T::infinity()
        } else {
            (critval * w[(0, 0)] / T::from_count(n)).sqrt()
        };
        Region::Interval {
            lower: theta_hat[0] - half,
            upper: theta_hat[0] + half,
        }
    } else {
        Region::Ellipsoid {
            center: theta_hat.clone(),
            shape: w.scaled(T::one() / T::from_count(n)),
            radius_sq: critval,
        }
    };
    Ok(SelfNormResult {
        theta_hat,
        w_matrix: w,
        n_eff: n,
        level,
        critval,
        region,
    })
}

/// Interval `theta_N -/+ sqrt(critval W_N / N)` for scalar statistics.
pub fn sn_interval<T: Scalar>(
    seq: &EstimateSequence<T>,
    level: f64,
    critval: T,
) -> Result<SelfNormResult<T>> {
    if seq.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: seq.dim(),
        });
    }
    sn_region(seq, level, critval)
}

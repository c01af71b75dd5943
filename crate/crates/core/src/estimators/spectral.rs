use std::f64::consts::PI;

use serde::Serialize;

use super::moments::{variance_floor, Divisor, LagTracker};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{EstimateSequence, TimeSeries};

/// Weight function on `[0, pi]` defining a spectral mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PhiSpec {
    /// `2 cos(m lambda)`; the spectral mean is `gamma(m)`.
    Cosine(usize),
    /// Indicator of `[0, x]`; the spectral mean is `F(x)`.
    Indicator(f64),
}

impl PhiSpec {
    pub fn indicator(x: f64) -> Result<Self> {
        let phi = PhiSpec::Indicator(x);
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PhiSpec::Indicator(x) if !(0.0..=PI).contains(&x) => Err(Error::InvalidArgument(
                format!("indicator cut-off {x} outside [0, pi]"),
            )),
            _ => Ok(()),
        }
    }
}

/// Coefficients `g_k` with `G(I_t, phi) = sum_k gamma_t(k) g_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierCoeffs {
    g: Vec<f64>,
}

impl FourierCoeffs {
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn get(&self, k: usize) -> f64 {
        self.g.get(k).copied().unwrap_or(0.0)
    }

    /// `(k, g_k)` for the lags that contribute.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.g
            .iter()
            .enumerate()
            .filter(|(_, &g)| g != 0.0)
            .map(|(k, &g)| (k, g))
    }
}

/// `g_0..g_{k_max}`. Indicator coefficients vanish exactly when `k x` is a
/// multiple of `pi`, so `x = pi` and `x = pi / 2` keep exact zeros.
pub fn fourier_coeffs(phi: PhiSpec, k_max: usize) -> FourierCoeffs {
    let g = (0..=k_max)
        .map(|k| match phi {
            PhiSpec::Cosine(m) => {
                if k == m {
                    1.0
                } else {
                    0.0
                }
            }
            PhiSpec::Indicator(x) => {
                if k == 0 {
                    return x / (2.0 * PI);
                }
                let turns = k as f64 * x / PI;
                if (turns - turns.round()).abs() <= 1e-12 * turns.max(1.0) {
                    0.0
                } else {
                    (k as f64 * x).sin() / (PI * k as f64)
                }
            }
        })
        .collect();
    FourierCoeffs { g }
}

pub(crate) const SPECTRAL_FIRST_VALID: usize = 4;

fn spectral_tracker<T: Scalar>(ts: &TimeSeries<T>, coeffs: &FourierCoeffs) -> (LagTracker<T>, Vec<T>) {
    let mut lags = vec![0];
    let mut weights = vec![T::lit(coeffs.get(0))];
    for (k, g) in coeffs.nonzero().filter(|&(k, _)| k > 0) {
        lags.push(k);
        weights.push(T::lit(g));
    }
    (LagTracker::new(ts.centered(), lags), weights)
}

fn weighted_sum<T: Scalar>(tr: &LagTracker<T>, weights: &[T]) -> T {
    let t = tr.t();
    let mut s = T::zero();
    for (i, (&k, &w)) in tr.lags().iter().zip(weights).enumerate() {
        if k >= t {
            break;
        }
        s += w * tr.centered_sum(i);
    }
    s / T::from_count(t)
}

fn check_len(n: usize) -> Result<()> {
    if n < SPECTRAL_FIRST_VALID {
        return Err(Error::TooShort {
            n,
            min: SPECTRAL_FIRST_VALID,
        });
    }
    Ok(())
}

/// Prefix spectral means `G(I_t, phi)`, `t = 4..n`, with divisor-`t`
/// mean-corrected autocovariances.
pub fn prefix_spectral_mean<T: Scalar>(
    ts: &TimeSeries<T>,
    phi: PhiSpec,
) -> Result<EstimateSequence<T>> {
    phi.validate()?;
    let n = ts.len();
    check_len(n)?;
    let coeffs = fourier_coeffs(phi, n - 1);
    let (mut tr, weights) = spectral_tracker(ts, &coeffs);
    tr.advance_to(SPECTRAL_FIRST_VALID - 1);
    let mut out = Vec::with_capacity(n - SPECTRAL_FIRST_VALID + 1);
    for _ in SPECTRAL_FIRST_VALID..=n {
        tr.advance();
        out.push(weighted_sum(&tr, &weights));
    }
    EstimateSequence::from_scalars(n, SPECTRAL_FIRST_VALID, out)
}

/// Prefix ratios `G(I_t, phi) / G(I_t, 1)`, where `G(I_t, 1) = gamma_t(0) / 2`.
pub fn prefix_spectral_ratio<T: Scalar>(
    ts: &TimeSeries<T>,
    phi: PhiSpec,
) -> Result<EstimateSequence<T>> {
    phi.validate()?;
    let n = ts.len();
    check_len(n)?;
    let floor = variance_floor(ts.values());
    let coeffs = fourier_coeffs(phi, n - 1);
    let (mut tr, weights) = spectral_tracker(ts, &coeffs);
    tr.advance_to(SPECTRAL_FIRST_VALID - 1);
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(n - SPECTRAL_FIRST_VALID + 1);
    for t in SPECTRAL_FIRST_VALID..=n {
        tr.advance();
        let g0 = tr.autocov(0, Divisor::FullN);
        if g0 <= floor {
            return Err(Error::DegenerateVariance(t));
        }
        out.push(weighted_sum(&tr, &weights) / (half * g0));
    }
    EstimateSequence::from_scalars(n, SPECTRAL_FIRST_VALID, out)
}

/// Full-sample spectral mean from two-pass autocovariances.
pub fn spectral_mean<T: Scalar>(x: &[T], phi: PhiSpec) -> T {
    let n = x.len();
    let coeffs = fourier_coeffs(phi, n - 1);
    coeffs
        .nonzero()
        .map(|(k, g)| T::lit(g) * super::moments::sample_autocov(x, k, Divisor::FullN))
        .sum()
}

/// Full-sample spectral ratio.
pub fn spectral_ratio<T: Scalar>(x: &[T], phi: PhiSpec) -> Result<T> {
    let g0 = super::moments::sample_autocov(x, 0, Divisor::FullN);
    if g0 <= variance_floor(x) {
        return Err(Error::DegenerateVariance(x.len()));
    }
    Ok(spectral_mean(x, phi) / (T::lit(0.5) * g0))
}

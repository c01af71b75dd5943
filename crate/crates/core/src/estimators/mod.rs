//! Recursive prefix estimators `theta_t` computed from the first `t`
//! observations, plus single-shot full-sample versions of each statistic.

mod lad;
mod location;
mod moments;
mod spectral;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub use lad::{lad_ar, prefix_lad_ar, IRLS_MAX_ITER, IRLS_TOL, LAD_WARMUP, RESIDUAL_FLOOR};
pub use location::{prefix_mean, prefix_median, RunningMedian};
pub use moments::{
    prefix_autocorr, prefix_autocov, sample_autocorr, sample_autocov, Divisor,
};
pub use spectral::{
    fourier_coeffs, prefix_spectral_mean, prefix_spectral_ratio, spectral_mean, spectral_ratio,
    FourierCoeffs, PhiSpec,
};

pub(crate) use moments::{variance_floor, LagTracker};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{EstimateSequence, TimeSeries};

/// A statistic with a recursive estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    Mean,
    Median,
    AutoCov { lag: usize, divisor: Divisor },
    AutoCorr { lag: usize },
    SpectralMean(PhiSpec),
    SpectralRatio(PhiSpec),
    LadAr { order: usize },
}

impl EstimatorSpec {
    /// Dimension `q` of the estimate.
    pub fn dim(&self) -> usize {
        match self {
            EstimatorSpec::LadAr { order } => *order,
            _ => 1,
        }
    }

    /// Smallest prefix length with a defined estimate.
    pub fn first_valid(&self) -> usize {
        match *self {
            EstimatorSpec::Mean | EstimatorSpec::Median => 1,
            EstimatorSpec::AutoCov { lag, .. } | EstimatorSpec::AutoCorr { lag } => lag + 2,
            EstimatorSpec::SpectralMean(_) | EstimatorSpec::SpectralRatio(_) => {
                spectral::SPECTRAL_FIRST_VALID
            }
            EstimatorSpec::LadAr { order } => order + LAD_WARMUP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::AutoCorr { lag: 0 } => {
                Err(Error::InvalidArgument("autocorrelation lag must be >= 1".into()))
            }
            EstimatorSpec::LadAr { order: 0 } => {
                Err(Error::InvalidArgument("LAD order must be >= 1".into()))
            }
            EstimatorSpec::SpectralMean(phi) | EstimatorSpec::SpectralRatio(phi) => phi.validate(),
            _ => Ok(()),
        }
    }

    /// Recursive estimates `theta_t` for `t = first_valid..=n`.
    pub fn prefix<T: Scalar>(&self, ts: &TimeSeries<T>) -> Result<EstimateSequence<T>> {
        match *self {
            EstimatorSpec::Mean => prefix_mean(ts),
            EstimatorSpec::Median => prefix_median(ts),
            EstimatorSpec::AutoCov { lag, divisor } => prefix_autocov(ts, lag, divisor),
            EstimatorSpec::AutoCorr { lag } => prefix_autocorr(ts, lag),
            EstimatorSpec::SpectralMean(phi) => prefix_spectral_mean(ts, phi),
            EstimatorSpec::SpectralRatio(phi) => prefix_spectral_ratio(ts, phi),
            EstimatorSpec::LadAr { order } => prefix_lad_ar(ts, order),
        }
    }

    /// The statistic on the full sample, computed without the recursion.
    pub fn estimate<T: Scalar>(&self, ts: &TimeSeries<T>) -> Result<Vec<T>> {
        self.validate()?;
        let n = ts.len();
        if n < self.first_valid() {
            return Err(match *self {
                EstimatorSpec::AutoCov { lag, .. } | EstimatorSpec::AutoCorr { lag } => {
                    Error::LagTooLarge { lag, n }
                }
                _ => Error::TooShort {
                    n,
                    min: self.first_valid(),
                },
            });
        }
        let x = ts.values();
        Ok(match *self {
            EstimatorSpec::Mean => vec![ts.mean()],
            EstimatorSpec::Median => vec![location::median_of(x)],
            EstimatorSpec::AutoCov { lag, divisor } => vec![sample_autocov(x, lag, divisor)],
            EstimatorSpec::AutoCorr { lag } => vec![sample_autocorr(x, lag)?],
            EstimatorSpec::SpectralMean(phi) => vec![spectral_mean(x, phi)],
            EstimatorSpec::SpectralRatio(phi) => vec![spectral_ratio(x, phi)?],
            EstimatorSpec::LadAr { order } => lad_ar(ts, order)?,
        })
    }
}

fn parse_count(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid {what} {s:?}")))
}

/// Parses a frequency such as `1.2`, `pi`, `pi/2` or `3pi/4`.
pub fn parse_frequency(s: &str) -> Result<f64> {
    let bad = || Error::InvalidArgument(format!("invalid frequency {s:?}"));
    let s = s.trim();
    if let Some(idx) = s.find("pi") {
        let (num, rest) = s.split_at(idx);
        let mult = match num.trim_end_matches('*') {
            "" => 1.0,
            m => m.parse::<f64>().map_err(|_| bad())?,
        };
        let rest = &rest[2..];
        let div = match rest.strip_prefix('/') {
            Some(d) => d.parse::<f64>().map_err(|_| bad())?,
            None if rest.is_empty() => 1.0,
            None => return Err(bad()),
        };
        Ok(mult * PI / div)
    } else {
        s.parse().map_err(|_| bad())
    }
}

fn format_frequency(x: f64) -> String {
    for div in 1..=12u32 {
        for mult in 0..=div {
            if (x - f64::from(mult) * PI / f64::from(div)).abs() < 1e-15 && mult > 0 {
                let m = if mult == 1 { String::new() } else { mult.to_string() };
                return if div == 1 {
                    format!("{m}pi")
                } else {
                    format!("{m}pi/{div}")
                };
            }
        }
    }
    format!("{x}")
}

fn parse_phi(parts: &[&str]) -> Result<PhiSpec> {
    match parts {
        ["cos", m] => Ok(PhiSpec::Cosine(parse_count(m, "cosine index")?)),
        [x] => PhiSpec::indicator(parse_frequency(x)?),
        _ => Err(Error::InvalidArgument(format!(
            "invalid weight function {:?}",
            parts.join(":")
        ))),
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    /// Accepts `mean`, `median`, `acov:k`, `acov:k:tilde`, `acf:k`,
    /// `specmean:x`, `specmean:cos:m`, `specratio:x`, `specratio:cos:m` and
    /// `ladar:p`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let spec = match parts.as_slice() {
            ["mean"] => EstimatorSpec::Mean,
            ["median"] => EstimatorSpec::Median,
            ["acov", k] => EstimatorSpec::AutoCov {
                lag: parse_count(k, "lag")?,
                divisor: Divisor::FullN,
            },
            ["acov", k, "tilde"] => EstimatorSpec::AutoCov {
                lag: parse_count(k, "lag")?,
                divisor: Divisor::NMinusLag,
            },
            ["acf", k] => EstimatorSpec::AutoCorr {
                lag: parse_count(k, "lag")?,
            },
            ["specmean", rest @ ..] => EstimatorSpec::SpectralMean(parse_phi(rest)?),
            ["specratio", rest @ ..] => EstimatorSpec::SpectralRatio(parse_phi(rest)?),
            ["ladar", p] => EstimatorSpec::LadAr {
                order: parse_count(p, "order")?,
            },
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown statistic {s:?}; expected mean, median, acov:k, acf:k, \
                     specmean:x, specratio:x or ladar:p"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PhiSpec::Cosine(m) => write!(f, "cos:{m}"),
            PhiSpec::Indicator(x) => f.write_str(&format_frequency(x)),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Mean => f.write_str("mean"),
            EstimatorSpec::Median => f.write_str("median"),
            EstimatorSpec::AutoCov {
                lag,
                divisor: Divisor::FullN,
            } => write!(f, "acov:{lag}"),
            EstimatorSpec::AutoCov {
                lag,
                divisor: Divisor::NMinusLag,
            } => write!(f, "acov:{lag}:tilde"),
            EstimatorSpec::AutoCorr { lag } => write!(f, "acf:{lag}"),
            EstimatorSpec::SpectralMean(phi) => write!(f, "specmean:{phi}"),
            EstimatorSpec::SpectralRatio(phi) => write!(f, "specratio:{phi}"),
            EstimatorSpec::LadAr { order } => write!(f, "ladar:{order}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        for s in [
            "mean",
            "median",
            "acov:1",
            "acov:0:tilde",
            "acf:3",
            "specmean:pi/2",
            "specratio:pi/2",
            "specmean:cos:2",
            "specratio:pi",
            "specmean:3pi/4",
            "ladar:2",
        ] {
            let spec: EstimatorSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        let spec: EstimatorSpec = "specmean:1.25".parse().unwrap();
        assert_eq!(spec, EstimatorSpec::SpectralMean(PhiSpec::Indicator(1.25)));
    }

    #[test]
    fn rejects_bad_strings() {
        for s in ["", "avg", "acf:0", "acf:x", "ladar:0", "specmean:4", "specmean:cos", "acov:1:bad"] {
            assert!(s.parse::<EstimatorSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn frequency_forms() {
        assert_eq!(parse_frequency("pi").unwrap(), PI);
        assert_eq!(parse_frequency("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_frequency("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_frequency("0.5").unwrap(), 0.5);
        assert!(parse_frequency("pi/").is_err());
    }

    #[test]
    fn dims_and_first_valid() {
        assert_eq!(EstimatorSpec::LadAr { order: 2 }.dim(), 2);
        assert_eq!(EstimatorSpec::LadAr { order: 2 }.first_valid(), 12);
        assert_eq!(EstimatorSpec::AutoCorr { lag: 1 }.first_valid(), 3);
        assert_eq!(
            EstimatorSpec::SpectralMean(PhiSpec::Cosine(1)).first_valid(),
            4
        );
    }
}

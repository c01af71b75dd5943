//! Simulation models: uncorrelated processes for size studies, AR(1) with
//! dependent innovations for power studies, and the linear families M1-M9
//! with normal, Student-t and ARCH(1) innovations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{fourier_coeffs, EstimatorSpec};
use crate::series::TimeSeries;

/// Discarded start-up observations of recursive models.
pub const BURN_IN: usize = 1000;
pub const GARCH_OMEGA: f64 = 0.001;
pub const GARCH_ALPHA: f64 = 0.02;
pub const GARCH_BETA: f64 = 0.8;
pub const BILINEAR_COEF: f64 = 0.5;
pub const HETERO_SCALES: [f64; 12] = [1.0, 1.0, 1.0, 2.0, 3.0, 1.0, 1.0, 1.0, 1.0, 2.0, 4.0, 6.0];
pub const FAMILY_AR1: f64 = 0.7;
pub const FAMILY_MA1: f64 = 0.8;
pub const FAMILY_AR2: (f64, f64) = (0.6, 0.35);

/// Innovation of an AR(1) power model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ar1Innovation {
    Garch,
    Bilinear,
    Normal,
}

/// Linear filter of the M1-M9 family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    Ar1,
    Ma1,
    Ar2,
}

/// Unit-variance innovation of the M1-M9 family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyNoise {
    Normal,
    /// `0.6^{1/2} e` with `e ~ t(5)`.
    ScaledT5,
    /// `e / 0.6^{1/2}` with `e_t = u_t (0.5 e_{t-1}^2 + 0.3)^{1/2}`.
    ScaledArch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    IidNormal,
    IidT6,
    DemeanedLogNormal,
    /// `u_t u_{t-1}`.
    OneDependent,
    /// `s_t u_t u_{t-1}` with `s_t` cycling through [`HETERO_SCALES`].
    Hetero12,
    /// `u_{t-2} u_{t-1} (u_{t-2} + u_t + 1)`.
    NonMds,
    Garch11,
    /// `u_t + 0.5 u_{t-1} X_{t-2}`.
    Bilinear,
    /// Model `M{index}`, `index` in `1..=9`.
    Family { index: u8 },
    Ar1 { rho: f64, innovation: Ar1Innovation },
}

impl ModelSpec {
    pub fn family(index: u8) -> Result<Self> {
        if !(1..=9).contains(&index) {
            return Err(Error::InvalidArgument(format!("no model m{index}; expected m1..m9")));
        }
        Ok(ModelSpec::Family { index })
    }

    pub fn ar1(rho: f64, innovation: Ar1Innovation) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "AR(1) coefficient must satisfy |rho| < 1, got {rho}"
            )));
        }
        Ok(ModelSpec::Ar1 { rho, innovation })
    }

    pub fn family_parts(index: u8) -> (Filter, FamilyNoise) {
        let filter = match index {
            1..=3 => Filter::Ar1,
            4..=6 => Filter::Ma1,
            _ => Filter::Ar2,
        };
        let noise = match (index - 1) % 3 {
            0 => FamilyNoise::Normal,
            1 => FamilyNoise::ScaledT5,
            _ => FamilyNoise::ScaledArch,
        };
        (filter, noise)
    }

    /// The same model with its autoregressive coefficient set to zero.
    pub fn null_companion(&self) -> Self {
        match *self {
            ModelSpec::Ar1 { innovation, .. } => ModelSpec::Ar1 {
                rho: 0.0,
                innovation,
            },
            other => other,
        }
    }

    /// Draws `n` observations.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<TimeSeries<f64>> {
        if n < 2 {
            return Err(Error::TooShort { n, min: 2 });
        }
        let x = match *self {
            ModelSpec::IidNormal => (0..n).map(|_| normal(rng)).collect(),
            ModelSpec::IidT6 => {
                let t = StudentT::new(6.0).expect("valid dof");
                (0..n).map(|_| t.sample(rng)).collect()
            }
            ModelSpec::DemeanedLogNormal => {
                let shift = 0.5f64.exp();
                (0..n).map(|_| normal(rng).exp() - shift).collect()
            }
            ModelSpec::OneDependent => {
                let u: Vec<f64> = (0..=n).map(|_| normal(rng)).collect();
                (1..=n).map(|t| u[t] * u[t - 1]).collect()
            }
            ModelSpec::Hetero12 => {
                let u: Vec<f64> = (0..=n).map(|_| normal(rng)).collect();
                (1..=n).map(|t| hetero_scale(t) * u[t] * u[t - 1]).collect()
            }
            ModelSpec::NonMds => {
                let u: Vec<f64> = (0..n + 2).map(|_| normal(rng)).collect();
                (2..n + 2)
                    .map(|t| u[t - 2] * u[t - 1] * (u[t - 2] + u[t] + 1.0))
                    .collect()
            }
            ModelSpec::Garch11 => garch_path(n, rng),
            ModelSpec::Bilinear => bilinear_path(n, rng),
            ModelSpec::Family { index } => {
                let (filter, noise) = Self::family_parts(index);
                let e = family_noise(noise, n + BURN_IN, rng);
                let y = apply_filter(filter, &e);
                y[BURN_IN..].to_vec()
            }
            ModelSpec::Ar1 { rho, innovation } => {
                let e = match innovation {
                    Ar1Innovation::Garch => garch_path(n + BURN_IN, rng),
                    Ar1Innovation::Bilinear => bilinear_path(n + BURN_IN, rng),
                    Ar1Innovation::Normal => (0..n + BURN_IN).map(|_| normal(rng)).collect(),
                };
                let mut x = Vec::with_capacity(e.len());
                let mut prev = 0.0;
                for v in e {
                    prev = rho * prev + v;
                    x.push(prev);
                }
                x.split_off(BURN_IN)
            }
        };
        TimeSeries::new(x)
    }

    /// MA(infinity) weights and innovation variance for linear models.
    fn linear_form(&self) -> Option<(Vec<f64>, f64)> {
        const LEN: usize = 4000;
        match *self {
            ModelSpec::Family { index } => {
                let (filter, _) = Self::family_parts(index);
                Some((filter_weights(filter, LEN), 1.0))
            }
            ModelSpec::Ar1 { rho, innovation } => {
                let var = match innovation {
                    Ar1Innovation::Garch => GARCH_OMEGA / (1.0 - GARCH_ALPHA - GARCH_BETA),
                    Ar1Innovation::Bilinear => 1.0 / (1.0 - BILINEAR_COEF * BILINEAR_COEF),
                    Ar1Innovation::Normal => 1.0,
                };
                let mut psi = Vec::with_capacity(LEN);
                let mut p = 1.0;
                for _ in 0..LEN {
                    psi.push(p);
                    p *= rho;
                }
                Some((psi, var))
            }
            _ => None,
        }
    }

    /// Population autocovariance `gamma(k)` for linear models.
    pub fn autocov(&self, k: usize) -> Option<f64> {
        let (psi, var) = self.linear_form()?;
        Some(var * psi.iter().zip(&psi[k.min(psi.len())..]).map(|(a, b)| a * b).sum::<f64>())
    }

    /// True value of the statistic under this model, where it has a
    /// closed form through the autocovariances or symmetry.
    pub fn truth(&self, spec: &EstimatorSpec) -> Option<Vec<f64>> {
        let symmetric = match *self {
            ModelSpec::Family { .. } => true,
            ModelSpec::Ar1 { innovation, .. } => innovation != Ar1Innovation::Bilinear,
            ModelSpec::IidNormal | ModelSpec::IidT6 => true,
            _ => false,
        };
        match *spec {
            EstimatorSpec::Mean => Some(vec![0.0]),
            EstimatorSpec::Median if symmetric => Some(vec![0.0]),
            EstimatorSpec::Median if *self == ModelSpec::DemeanedLogNormal => {
                Some(vec![1.0 - 0.5f64.exp()])
            }
            EstimatorSpec::AutoCov { lag, .. } => self.autocov(lag).map(|g| vec![g]),
            EstimatorSpec::AutoCorr { lag } => Some(vec![self.autocov(lag)? / self.autocov(0)?]),
            EstimatorSpec::SpectralMean(phi) => Some(vec![self.spectral_mean(phi)?]),
            EstimatorSpec::SpectralRatio(phi) => {
                Some(vec![self.spectral_mean(phi)? / (0.5 * self.autocov(0)?)])
            }
            EstimatorSpec::LadAr { order } => match *self {
                ModelSpec::Family { index } => match (Self::family_parts(index).0, order) {
                    (Filter::Ar1, 1) => Some(vec![FAMILY_AR1]),
                    (Filter::Ar2, 2) => Some(vec![FAMILY_AR2.0, FAMILY_AR2.1]),
                    _ => None,
                },
                ModelSpec::Ar1 { rho, innovation } if innovation != Ar1Innovation::Bilinear && order == 1 => {
                    Some(vec![rho])
                }
                _ => None,
            },
            _ => None,
        }
    }

    fn spectral_mean(&self, phi: crate::estimators::PhiSpec) -> Option<f64> {
        let (psi, var) = self.linear_form()?;
        let kmax = psi.len() - 1;
        let g = fourier_coeffs(phi, kmax);
        // gamma(k) for all k at once through the weight autocorrelation
        let mut total = 0.0;
        for (k, gk) in g.nonzero() {
            let gamma: f64 = psi.iter().zip(&psi[k..]).map(|(a, b)| a * b).sum();
            total += gk * var * gamma;
        }
        Some(total)
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn hetero_scale(t: usize) -> f64 {
    HETERO_SCALES[(t - 1) % 12]
}

/// GARCH(1,1) path started at the unconditional variance, after burn-in.
fn garch_path<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut sigma2 = GARCH_OMEGA / (1.0 - GARCH_ALPHA - GARCH_BETA);
    let mut prev = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n + BURN_IN {
        sigma2 = GARCH_OMEGA + GARCH_ALPHA * prev * prev + GARCH_BETA * sigma2;
        prev = normal(rng) * sigma2.sqrt();
        if i >= BURN_IN {
            out.push(prev);
        }
    }
    out
}

fn bilinear_path<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let total = n + BURN_IN;
    let mut x = vec![0.0f64; total];
    let mut u_prev = 0.0;
    for t in 0..total {
        let u = normal(rng);
        let x2 = if t >= 2 { x[t - 2] } else { 0.0 };
        x[t] = u + BILINEAR_COEF * u_prev * x2;
        u_prev = u;
    }
    x.split_off(BURN_IN)
}

fn family_noise<R: Rng + ?Sized>(noise: FamilyNoise, n: usize, rng: &mut R) -> Vec<f64> {
    let root06 = 0.6f64.sqrt();
    match noise {
        FamilyNoise::Normal => (0..n).map(|_| normal(rng)).collect(),
        FamilyNoise::ScaledT5 => {
            let t = StudentT::new(5.0).expect("valid dof");
            (0..n).map(|_| root06 * t.sample(rng)).collect()
        }
        FamilyNoise::ScaledArch => {
            let mut prev = 0.0f64;
            (0..n)
                .map(|_| {
                    prev = normal(rng) * (0.5 * prev * prev + 0.3).sqrt();
                    prev / root06
                })
                .collect()
        }
    }
}

fn apply_filter(filter: Filter, e: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; e.len()];
    for t in 0..e.len() {
        x[t] = match filter {
            Filter::Ar1 => e[t] + if t >= 1 { FAMILY_AR1 * x[t - 1] } else { 0.0 },
            Filter::Ma1 => e[t] + if t >= 1 { FAMILY_MA1 * e[t - 1] } else { 0.0 },
            Filter::Ar2 => {
                let x1 = if t >= 1 { x[t - 1] } else { 0.0 };
                let x2 = if t >= 2 { x[t - 2] } else { 0.0 };
                e[t] + FAMILY_AR2.0 * x1 + FAMILY_AR2.1 * x2
            }
        };
    }
    x
}

fn filter_weights(filter: Filter, len: usize) -> Vec<f64> {
    let mut impulse = vec![0.0; len];
    impulse[0] = 1.0;
    apply_filter(filter, &impulse)
}

/// `F(pi/2) / F(pi)` of a Gaussian AR(1): `(2/pi) arctan((1+rho)/(1-rho))`.
pub fn ar1_half_band_ratio(rho: f64) -> f64 {
    2.0 / PI * ((1.0 + rho) / (1.0 - rho)).atan()
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "iidn" => return Ok(ModelSpec::IidNormal),
            "t6" => return Ok(ModelSpec::IidT6),
            "lognorm" => return Ok(ModelSpec::DemeanedLogNormal),
            "onedep" => return Ok(ModelSpec::OneDependent),
            "hetero" => return Ok(ModelSpec::Hetero12),
            "nonmds" => return Ok(ModelSpec::NonMds),
            "garch" => return Ok(ModelSpec::Garch11),
            "bilinear" => return Ok(ModelSpec::Bilinear),
            _ => {}
        }
        if let Some(idx) = s.strip_prefix('m') {
            if let Ok(i) = idx.parse::<u8>() {
                return ModelSpec::family(i);
            }
        }
        if let Some(rest) = s.strip_prefix("ar1:") {
            let (rho, innov) = rest.split_once(':').unwrap_or((rest, "normal"));
            let rho: f64 = rho
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid AR coefficient {rho:?}")))?;
            let innovation = match innov {
                "garch" => Ar1Innovation::Garch,
                "bilinear" => Ar1Innovation::Bilinear,
                "normal" => Ar1Innovation::Normal,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown innovation {innov:?}; expected garch, bilinear or normal"
                    )))
                }
            };
            return ModelSpec::ar1(rho, innovation);
        }
        Err(Error::InvalidArgument(format!(
            "unknown model {s:?}; expected iidn, t6, lognorm, onedep, hetero, nonmds, garch, \
             bilinear, m1..m9 or ar1:RHO:INNOV"
        )))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::IidNormal => f.write_str("iidn"),
            ModelSpec::IidT6 => f.write_str("t6"),
            ModelSpec::DemeanedLogNormal => f.write_str("lognorm"),
            ModelSpec::OneDependent => f.write_str("onedep"),
            ModelSpec::Hetero12 => f.write_str("hetero"),
            ModelSpec::NonMds => f.write_str("nonmds"),
            ModelSpec::Garch11 => f.write_str("garch"),
            ModelSpec::Bilinear => f.write_str("bilinear"),
            ModelSpec::Family { index } => write!(f, "m{index}"),
            ModelSpec::Ar1 { rho, innovation } => {
                let name = match innovation {
                    Ar1Innovation::Garch => "garch",
                    Ar1Innovation::Bilinear => "bilinear",
                    Ar1Innovation::Normal => "normal",
                };
                write!(f, "ar1:{rho}:{name}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{sample_autocov, Divisor, PhiSpec};
    use crate::rng::RngStream;

    fn draw(model: &str, n: usize, seed: u64) -> Vec<f64> {
        let m: ModelSpec = model.parse().unwrap();
        m.generate(n, &mut RngStream::new(seed, 0).rng()).unwrap().into_values()
    }

    #[test]
    fn names_round_trip() {
        for s in [
            "iidn", "t6", "lognorm", "onedep", "hetero", "nonmds", "garch", "bilinear", "m1", "m9",
            "ar1:0.5:garch", "ar1:0.3:bilinear", "ar1:0.8:normal",
        ] {
            assert_eq!(s.parse::<ModelSpec>().unwrap().to_string(), s);
        }
        for s in ["m0", "m10", "ar1:1.0:normal", "ar1:0.5:cauchy", "arma"] {
            assert!(s.parse::<ModelSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn hetero_scale_cycle() {
        assert_eq!(hetero_scale(13), 1.0);
        assert_eq!(hetero_scale(11), 4.0);
        assert_eq!(hetero_scale(12), 6.0);
        assert_eq!(hetero_scale(24), 6.0);
    }

    #[test]
    fn reproducible() {
        for m in ["garch", "m3", "ar1:0.5:bilinear", "nonmds"] {
            assert_eq!(draw(m, 50, 4), draw(m, 50, 4));
            assert_ne!(draw(m, 50, 4), draw(m, 50, 5));
        }
    }

    #[test]
    fn family_lag_one_correlation() {
        let x = draw("m1", 10_000, 1);
        let r = sample_autocov(&x, 1, Divisor::FullN) / sample_autocov(&x, 0, Divisor::FullN);
        assert!((r - 0.7).abs() < 0.02, "{r}");
    }

    #[test]
    fn family_innovations_have_unit_variance() {
        for index in 1..=9u8 {
            let m = ModelSpec::Family { index };
            let g0 = m.autocov(0).unwrap();
            let x = draw(&m.to_string(), 40_000, u64::from(index));
            let v = sample_autocov(&x, 0, Divisor::FullN);
            assert!((v / g0 - 1.0).abs() < 0.12, "m{index}: {v} vs {g0}");
        }
    }

    #[test]
    fn uncorrelated_models() {
        for (m, tol) in [("onedep", 0.03), ("nonmds", 0.05), ("bilinear", 0.03), ("hetero", 0.1)] {
            let x = draw(m, 100_000, 2);
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let g0 = sample_autocov(&x, 0, Divisor::FullN);
            assert!(mean.abs() < tol, "{m} mean {mean}");
            for k in 1..4 {
                let r = sample_autocov(&x, k, Divisor::FullN) / g0;
                assert!(r.abs() < 0.02, "{m} lag {k}: {r}");
            }
        }
    }

    #[test]
    fn garch_stays_finite() {
        let x = draw("garch", 1_000_000, 3);
        assert!(x.iter().all(|v| v.is_finite()));
        let v = sample_autocov(&x, 0, Divisor::FullN);
        assert!((v / (GARCH_OMEGA / 0.18) - 1.0).abs() < 0.05);
    }

    #[test]
    fn analytic_truths() {
        let m1 = ModelSpec::Family { index: 1 };
        assert!((m1.autocov(0).unwrap() - 1.0 / 0.51).abs() < 1e-12);
        let r = m1.truth(&EstimatorSpec::AutoCorr { lag: 1 }).unwrap()[0];
        assert!((r - 0.7).abs() < 1e-12);
        let m4 = ModelSpec::Family { index: 4 };
        let r = m4.truth(&EstimatorSpec::AutoCorr { lag: 1 }).unwrap()[0];
        assert!((r - 0.8 / 1.64).abs() < 1e-12);
        let half = EstimatorSpec::SpectralRatio(PhiSpec::Indicator(PI / 2.0));
        for rho in [0.0, 0.5, 0.7, 0.8] {
            let m = ModelSpec::ar1(rho, Ar1Innovation::Normal).unwrap();
            let v = m.truth(&half).unwrap()[0];
            assert!((v - ar1_half_band_ratio(rho)).abs() < 1e-10, "rho {rho}: {v}");
        }
        let v = m1.truth(&half).unwrap()[0];
        assert!((v - ar1_half_band_ratio(0.7)).abs() < 1e-10);
        // F(pi/2) for M1 is the ratio times half the variance
        let f = m1.truth(&EstimatorSpec::SpectralMean(PhiSpec::Indicator(PI / 2.0))).unwrap()[0];
        assert!((f - ar1_half_band_ratio(0.7) * 0.5 / 0.51).abs() < 1e-10);
        assert_eq!(
            ModelSpec::family(8).unwrap().truth(&EstimatorSpec::LadAr { order: 2 }),
            Some(vec![0.6, 0.35])
        );
        assert_eq!(ModelSpec::Hetero12.truth(&EstimatorSpec::AutoCorr { lag: 1 }), None);
    }

    #[test]
    fn lognormal_median_shift() {
        let m = ModelSpec::DemeanedLogNormal;
        let t = m.truth(&EstimatorSpec::Median).unwrap()[0];
        let mut x = draw("lognorm", 100_001, 9);
        x.sort_by(f64::total_cmp);
        assert!((x[50_000] - t).abs() < 0.02);
    }
}

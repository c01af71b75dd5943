//! Tests of `H_0: gamma(1) = .. = gamma(K) = 0` and efficiently studentized
//! intervals for the lag-one autocovariance and autocorrelation.
//!
//! The recursive test normalizes `c_N = (gamma_N(1), .., gamma_N(K))` by the
//! spread of recursive estimates `c_t`; Lobato's test uses partial sums of
//! lag products around the full-sample mean; the studentized test uses a
//! prewhitened Bartlett long-run covariance with a data-driven bandwidth.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{sample_autocov, variance_floor, Divisor, LagTracker};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;
use crate::series::TimeSeries;
use crate::stats::{chi2_critical, normal_quantile};

/// Cap on the absolute AR(1) prewhitening coefficient.
pub const PREWHITEN_CAP: f64 = 0.97;
/// Constant of the Bartlett-kernel bandwidth rule.
pub const BARTLETT_RATE: f64 = 1.1447;
pub const MIN_BANDWIDTH_LEN: usize = 20;
/// The tests need `n > K + MIN_EXCESS`.
pub const MIN_EXCESS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoncorrMethod {
    SnRecursive,
    Lobato,
    NwStudentized,
}

impl NoncorrMethod {
    pub fn label(&self) -> &'static str {
        match self {
            NoncorrMethod::SnRecursive => "sn",
            NoncorrMethod::Lobato => "lobato",
            NoncorrMethod::NwStudentized => "nw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sn" => Ok(NoncorrMethod::SnRecursive),
            "lobato" => Ok(NoncorrMethod::Lobato),
            "nw" => Ok(NoncorrMethod::NwStudentized),
            _ => Err(Error::InvalidArgument(format!(
                "unknown test {s:?}; expected sn, lobato or nw"
            ))),
        }
    }

    /// Critical value at level `alpha`: `U_{K,alpha}` for the self-normalized
    /// tests, the chi-square quantile for the studentized one.
    pub fn critval(&self, k: usize, alpha: f64) -> Result<f64> {
        match self {
            NoncorrMethod::NwStudentized => Ok(chi2_critical(k, alpha)),
            _ => crate::critvals::critval(k, alpha),
        }
    }

    pub fn statistic<T: Scalar>(&self, ts: &TimeSeries<T>, k: usize) -> Result<T> {
        match self {
            NoncorrMethod::SnRecursive => sn_noncorr_parts(ts, k)?.statistic(),
            NoncorrMethod::Lobato => lobato_parts(ts, k)?.statistic(),
            NoncorrMethod::NwStudentized => qtilde_parts(ts, k)?.statistic(),
        }
    }

    pub fn test<T: Scalar>(&self, ts: &TimeSeries<T>, k: usize, critval: f64) -> Result<NoncorrResult> {
        let stat = self.statistic(ts, k)?.as_f64();
        Ok(NoncorrResult {
            k,
            statistic: stat,
            critval,
            reject: stat > critval,
            method: *self,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoncorrResult {
    pub k: usize,
    pub statistic: f64,
    pub critval: f64,
    pub reject: bool,
    pub method: NoncorrMethod,
}

/// Ingredients of a statistic `scale * v' M^{-1} v`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParts<T> {
    pub vector: Vec<T>,
    pub matrix: SquareMatrix<T>,
    pub scale: T,
}

impl<T: Scalar> QuadraticParts<T> {
    pub fn statistic(&self) -> Result<T> {
        let chol = self.matrix.cholesky()?;
        if self.vector.iter().all(|v| v.is_zero()) {
            return Ok(T::zero());
        }
        Ok(self.scale * chol.inv_quadratic_form(&self.vector))
    }
}

fn check_len(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    if n <= k + MIN_EXCESS {
        return Err(Error::TooShort {
            n,
            min: k + MIN_EXCESS + 1,
        });
    }
    Ok(())
}

fn full_sample_autocovs<T: Scalar>(x: &[T], k: usize) -> Vec<T> {
    (1..=k).map(|j| sample_autocov(x, j, Divisor::FullN)).collect()
}

/// Recursive statistic `N c_N' J~^{-1} c_N` with `N = n - K`.
///
/// For `t = 1..N`, `c_t` holds the autocovariances at lags `1..K` of the
/// first `t + K` observations around their own mean with divisor `t + K`,
/// and `J~ = N^{-2} sum_t t^2 (c_t - c_N)(c_t - c_N)'`.
pub fn sn_noncorr_parts<T: Scalar>(ts: &TimeSeries<T>, k: usize) -> Result<QuadraticParts<T>> {
    let n = ts.len();
    check_len(n, k)?;
    let big_n = n - k;
    let c_n = full_sample_autocovs(ts.values(), k);
    let mut tr = LagTracker::new(ts.centered(), (1..=k).collect());
    let nf = T::from_count(big_n);
    let mut j = SquareMatrix::zeros(k);
    let mut v = vec![T::zero(); k];
    for t in 1..=big_n {
        let window = t + k;
        tr.advance_to(window);
        let w = T::from_count(window);
        let r = T::from_count(t) / nf;
        for i in 0..k {
            v[i] = r * (tr.centered_sum(i) / w - c_n[i]);
        }
        j.add_outer(&v, T::one());
    }
    Ok(QuadraticParts {
        vector: c_n,
        matrix: j,
        scale: nf,
    })
}

/// Lobato's statistic `N c_N' J^{-1} c_N` with `S_t = sum_{j<=t} (Z_j - c_N)`,
/// `Z_kt = (X_t - Xbar)(X_{t+k} - Xbar)` and `J = N^{-2} sum_t S_t S_t'`.
pub fn lobato_parts<T: Scalar>(ts: &TimeSeries<T>, k: usize) -> Result<QuadraticParts<T>> {
    let n = ts.len();
    check_len(n, k)?;
    let big_n = n - k;
    let y = ts.centered();
    let c_n = full_sample_autocovs(ts.values(), k);
    let nf = T::from_count(big_n);
    let mut s = vec![T::zero(); k];
    let mut v = vec![T::zero(); k];
    let mut j = SquareMatrix::zeros(k);
    for t in 0..big_n {
        for i in 0..k {
            s[i] += y[t] * y[t + i + 1] - c_n[i];
            v[i] = s[i] / nf;
        }
        j.add_outer(&v, T::one());
    }
    Ok(QuadraticParts {
        vector: c_n,
        matrix: j,
        scale: nf,
    })
}

/// Long-run covariance estimate with its tuning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrvEstimate<T> {
    pub matrix: SquareMatrix<T>,
    pub bandwidth: usize,
    pub kernel: &'static str,
    pub prewhitened: bool,
}

/// Plug-in bandwidth for the Bartlett kernel from sample autocovariances
/// up to lag `floor(2 (n/100)^{2/9})` with unit weights.
pub fn nw_bandwidth<T: Scalar>(series: &[T]) -> Result<usize> {
    let n = series.len();
    if n < MIN_BANDWIDTH_LEN {
        return Err(Error::TooShort {
            n,
            min: MIN_BANDWIDTH_LEN,
        });
    }
    let lmax = nw_truncation(n);
    let sig: Vec<f64> = (0..=lmax)
        .map(|j| sample_autocov(series, j, Divisor::FullN).as_f64())
        .collect();
    let s1: f64 = 2.0 * (1..=lmax).map(|j| j as f64 * sig[j]).sum::<f64>();
    let s0: f64 = sig[0] + 2.0 * sig[1..].iter().sum::<f64>();
    if !(s0 > 0.0) {
        return Err(Error::DegenerateVariance(n));
    }
    let gamma = BARTLETT_RATE * ((s1 / s0).powi(2)).cbrt();
    let bw = (gamma * (n as f64).cbrt()).ceil();
    Ok((bw as usize).min(n - 1).max(1))
}

/// Lag truncation `floor(2 (n/100)^{2/9})` of the bandwidth rule.
pub fn nw_truncation(n: usize) -> usize {
    (2.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

fn bandwidth_or_one<T: Scalar>(series: &[T]) -> usize {
    nw_bandwidth(series).unwrap_or(1)
}

/// Bartlett lag-window covariance of demeaned rows with divisor `rows.len()`.
fn bartlett_lrv<T: Scalar>(rows: &[Vec<T>], bandwidth: usize) -> SquareMatrix<T> {
    let m = rows.len();
    let d = rows[0].len();
    let mut v = SquareMatrix::zeros(d);
    let lf = T::from_count(bandwidth);
    for h in 0..bandwidth.min(m) {
        let weight = T::one() - T::from_count(h) / lf;
        let mut gamma = vec![T::zero(); d * d];
        for t in h..m {
            for a in 0..d {
                let ra = rows[t][a];
                for b in 0..d {
                    gamma[a * d + b] += ra * rows[t - h][b];
                }
            }
        }
        let mf = T::from_count(m);
        for a in 0..d {
            for b in 0..d {
                let g = gamma[a * d + b] / mf;
                let add = if h == 0 {
                    g
                } else {
                    weight * (g + gamma[b * d + a] / mf)
                };
                v[(a, b)] += add;
            }
        }
    }
    v
}

/// Residuals of a capped AR(1) fit to a zero-mean series.
fn ar1_residuals<T: Scalar>(e: &[T]) -> Vec<T> {
    let cap = T::lit(PREWHITEN_CAP);
    let num: T = (1..e.len()).map(|t| e[t] * e[t - 1]).sum();
    let den: T = (0..e.len() - 1).map(|t| e[t] * e[t]).sum();
    let a = if den > T::zero() {
        (num / den).max(-cap).min(cap)
    } else {
        T::zero()
    };
    (1..e.len()).map(|t| e[t] - a * e[t - 1]).collect()
}

fn demean_columns<T: Scalar>(rows: &mut [Vec<T>]) {
    let d = rows[0].len();
    let m = T::from_count(rows.len());
    for a in 0..d {
        let mean = rows.iter().map(|r| r[a]).sum::<T>() / m;
        rows.iter_mut().for_each(|r| r[a] -= mean);
    }
}

/// Long-run covariance of the demeaned rows: AR(1) prewhitening per
/// column, Bartlett window with the plug-in bandwidth of the summed
/// residuals, then recoloring by `1 / ((1 - a_i)(1 - a_j))`.
pub fn prewhitened_lrv<T: Scalar>(rows: &[Vec<T>]) -> Result<LrvEstimate<T>> {
    if rows.len() < MIN_BANDWIDTH_LEN + 1 {
        return Err(Error::TooShort {
            n: rows.len(),
            min: MIN_BANDWIDTH_LEN + 1,
        });
    }
    let mut e = rows.to_vec();
    demean_columns(&mut e);
    let d = e[0].len();
    let cap = T::lit(PREWHITEN_CAP);
    let coef: Vec<T> = (0..d)
        .map(|a| {
            let num: T = (1..e.len()).map(|t| e[t][a] * e[t - 1][a]).sum();
            let den: T = (0..e.len() - 1).map(|t| e[t][a] * e[t][a]).sum();
            if den > T::zero() {
                (num / den).max(-cap).min(cap)
            } else {
                T::zero()
            }
        })
        .collect();
    let resid: Vec<Vec<T>> = (1..e.len())
        .map(|t| (0..d).map(|a| e[t][a] - coef[a] * e[t - 1][a]).collect())
        .collect();
    let agg: Vec<T> = resid.iter().map(|r| r.iter().copied().sum()).collect();
    let bandwidth = bandwidth_or_one(&agg);
    let mut v = bartlett_lrv(&resid, bandwidth);
    for a in 0..d {
        for b in 0..d {
            v[(a, b)] /= (T::one() - coef[a]) * (T::one() - coef[b]);
        }
    }
    Ok(LrvEstimate {
        matrix: v,
        bandwidth,
        kernel: "bartlett",
        prewhitened: true,
    })
}

/// Wald statistic `n rho' (D V D')^{-1} rho` for the first `K` sample
/// autocorrelations, where `V` is the prewhitened long-run covariance of
/// `w_t = ((X_t - Xbar)(X_{t-k} - Xbar))_{k=0..K}` and `D` the Jacobian of
/// `gamma -> (gamma_k / gamma_0)_k`.
pub fn qtilde_parts<T: Scalar>(ts: &TimeSeries<T>, k: usize) -> Result<QuadraticParts<T>> {
    let n = ts.len();
    check_len(n, k)?;
    let x = ts.values();
    let g0 = sample_autocov(x, 0, Divisor::FullN);
    if g0 <= variance_floor(x) {
        return Err(Error::DegenerateVariance(n));
    }
    let rho: Vec<T> = full_sample_autocovs(x, k).into_iter().map(|g| g / g0).collect();
    let y = ts.centered();
    let rows: Vec<Vec<T>> = (k..n)
        .map(|t| (0..=k).map(|j| y[t] * y[t - j]).collect())
        .collect();
    let lrv = prewhitened_lrv(&rows)?;
    let jac: Vec<Vec<T>> = (0..k)
        .map(|i| {
            let mut r = vec![T::zero(); k + 1];
            r[0] = -rho[i] / g0;
            r[i + 1] = T::one() / g0;
            r
        })
        .collect();
    Ok(QuadraticParts {
        vector: rho,
        matrix: lrv.matrix.congruence(&jac),
        scale: T::from_count(n),
    })
}

pub fn sn_noncorr_test<T: Scalar>(ts: &TimeSeries<T>, k: usize, critval: f64) -> Result<NoncorrResult> {
    NoncorrMethod::SnRecursive.test(ts, k, critval)
}

pub fn lobato_test<T: Scalar>(ts: &TimeSeries<T>, k: usize, critval: f64) -> Result<NoncorrResult> {
    NoncorrMethod::Lobato.test(ts, k, critval)
}

/// Studentized test against the chi-square `K` critical value at `alpha`.
pub fn qtilde_test<T: Scalar>(ts: &TimeSeries<T>, k: usize, alpha: f64) -> Result<NoncorrResult> {
    NoncorrMethod::NwStudentized.test(ts, k, chi2_critical(k, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficientTarget {
    Gamma1,
    Rho1,
}

impl EfficientTarget {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gamma1" | "acov:1" => Ok(EfficientTarget::Gamma1),
            "rho1" | "acf:1" => Ok(EfficientTarget::Rho1),
            _ => Err(Error::InvalidArgument(format!(
                "efficient intervals cover acov:1 and acf:1, got {s:?}"
            ))),
        }
    }
}

/// Normal interval with a consistent long-run variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficientInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_err: f64,
    pub bandwidth: usize,
}

pub const EFFICIENT_MIN_LEN: usize = 50;

/// `theta -/+ z_{1-alpha/2} sqrt(var / n)`, with `var = V_11` for the
/// lag-one autocovariance and the delta-method
/// `gamma_0^{-2} (V_11 - 2 rho V_10 + rho^2 V_00)` for the autocorrelation.
/// `V` is the Bartlett lag-window covariance of
/// `((X_t - Xbar)^2, (X_t - Xbar)(X_{t-1} - Xbar))`, `t = 2..n`. The
/// bandwidth is selected on the AR(1) residuals of the summed pair, as in
/// [`prewhitened_lrv`], but `V` itself is not prewhitened.
pub fn efficient_ci<T: Scalar>(ts: &TimeSeries<T>, target: EfficientTarget, level: f64) -> Result<EfficientInterval> {
    let n = ts.len();
    if n < EFFICIENT_MIN_LEN {
        return Err(Error::TooShort {
            n,
            min: EFFICIENT_MIN_LEN,
        });
    }
    check_level(level)?;
    let x: Vec<f64> = ts.iter().map(|v| v.as_f64()).collect();
    let g0 = sample_autocov(&x, 0, Divisor::FullN);
    if g0 <= variance_floor(&x) {
        return Err(Error::DegenerateVariance(n));
    }
    let g1 = sample_autocov(&x, 1, Divisor::FullN);
    let m = x.iter().sum::<f64>() / n as f64;
    let mut rows: Vec<Vec<f64>> = (1..n)
        .map(|t| vec![(x[t] - m) * (x[t] - m), (x[t] - m) * (x[t - 1] - m)])
        .collect();
    demean_columns(&mut rows);
    let agg: Vec<f64> = rows.iter().map(|r| r[0] + r[1]).collect();
    let bandwidth = bandwidth_or_one(&ar1_residuals(&agg));
    let v = bartlett_lrv(&rows, bandwidth);
    let (estimate, var) = match target {
        EfficientTarget::Gamma1 => (g1, v[(1, 1)]),
        EfficientTarget::Rho1 => {
            let r = g1 / g0;
            (
                r,
                (v[(1, 1)] - r * v[(1, 0)] - r * v[(0, 1)] + r * r * v[(0, 0)]) / (g0 * g0),
            )
        }
    };
    if !(var > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let std_err = (var / n as f64).sqrt();
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    Ok(EfficientInterval {
        estimate,
        lower: estimate - z * std_err,
        upper: estimate + z * std_err,
        std_err,
        bandwidth,
    })
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    Ok(())
}

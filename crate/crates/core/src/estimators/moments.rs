use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{EstimateSequence, TimeSeries};

/// Divisor of the lag-`k` sample autocovariance on `t` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Divisor {
    /// `t`, giving a positive semi-definite autocovariance sequence.
    #[default]
    FullN,
    /// `t - k`.
    NMinusLag,
}

impl Divisor {
    pub(crate) fn value<T: Scalar>(self, t: usize, k: usize) -> T {
        match self {
            Divisor::FullN => T::from_count(t),
            Divisor::NMinusLag => T::from_count(t - k),
        }
    }
}

/// Incremental mean-corrected lag products over a growing prefix.
///
/// With `y` the series shifted by its full-sample mean, `P_t` its prefix
/// sums and `R_k(t) = sum_{j<=t-k} y_j y_{j+k}`, the centered sum on the
/// first `t` values is `R_k - m (P_{t-k} + P_t - P_k) + (t-k) m^2` with
/// `m = P_t / t`.
#[derive(Debug, Clone)]
pub(crate) struct LagTracker<T> {
    y: Vec<T>,
    prefix: Vec<T>,
    lags: Vec<usize>,
    cross: Vec<T>,
    t: usize,
}

impl<T: Scalar> LagTracker<T> {
    /// `lags` must be strictly increasing.
    pub(crate) fn new(y: Vec<T>, lags: Vec<usize>) -> Self {
        debug_assert!(lags.windows(2).all(|w| w[0] < w[1]));
        let mut prefix = Vec::with_capacity(y.len() + 1);
        let mut acc = T::zero();
        prefix.push(acc);
        for &v in &y {
            acc += v;
            prefix.push(acc);
        }
        let cross = vec![T::zero(); lags.len()];
        Self {
            y,
            prefix,
            lags,
            cross,
            t: 0,
        }
    }

    pub(crate) fn t(&self) -> usize {
        self.t
    }

    pub(crate) fn lags(&self) -> &[usize] {
        &self.lags
    }

    /// Moves to the prefix of length `t + 1`.
    pub(crate) fn advance(&mut self) {
        let t = self.t + 1;
        let newest = self.y[t - 1];
        for (i, &k) in self.lags.iter().enumerate() {
            if k >= t {
                break;
            }
            self.cross[i] += self.y[t - 1 - k] * newest;
        }
        self.t = t;
    }

    pub(crate) fn advance_to(&mut self, t: usize) {
        while self.t < t {
            self.advance();
        }
    }

    /// Mean-corrected sum for the `i`-th tracked lag at the current prefix;
    /// zero when the lag is not below `t`.
    pub(crate) fn centered_sum(&self, i: usize) -> T {
        let t = self.t;
        let k = self.lags[i];
        if k >= t {
            return T::zero();
        }
        let p = &self.prefix;
        let m = p[t] / T::from_count(t);
        let s = self.cross[i] - m * (p[t - k] + p[t] - p[k]) + T::from_count(t - k) * m * m;
        if k == 0 {
            s.max(T::zero())
        } else {
            s
        }
    }

    pub(crate) fn autocov(&self, i: usize, divisor: Divisor) -> T {
        self.centered_sum(i) / divisor.value(self.t, self.lags[i])
    }
}

/// Two-pass sample autocovariance at lag `k` with the sample mean removed.
pub fn sample_autocov<T: Scalar>(x: &[T], k: usize, divisor: Divisor) -> T {
    let n = x.len();
    let m = x.iter().copied().sum::<T>() / T::from_count(n);
    let s: T = (0..n.saturating_sub(k))
        .map(|j| (x[j] - m) * (x[j + k] - m))
        .sum();
    s / divisor.value(n, k)
}

/// Variance level below which a prefix counts as constant.
pub(crate) fn variance_floor<T: Scalar>(x: &[T]) -> T {
    let scale = x.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let rel = T::epsilon() * T::lit(16.0) * scale;
    T::lit(1e-14).max(rel * rel)
}

fn check_lag(k: usize, n: usize) -> Result<()> {
    if k + 2 > n {
        return Err(Error::LagTooLarge { lag: k, n });
    }
    Ok(())
}

/// Prefix autocovariances `gamma_t(k)`, `t = k+2..n`, each using the prefix
/// mean of the first `t` observations.
pub fn prefix_autocov<T: Scalar>(
    ts: &TimeSeries<T>,
    k: usize,
    divisor: Divisor,
) -> Result<EstimateSequence<T>> {
    let n = ts.len();
    check_lag(k, n)?;
    let first = k + 2;
    let mut tr = LagTracker::new(ts.centered(), vec![k]);
    tr.advance_to(first - 1);
    let mut out = Vec::with_capacity(n - first + 1);
    for _ in first..=n {
        tr.advance();
        out.push(tr.autocov(0, divisor));
    }
    EstimateSequence::from_scalars(n, first, out)
}

/// Prefix autocorrelations `gamma_t(k) / gamma_t(0)` for `k >= 1`.
pub fn prefix_autocorr<T: Scalar>(ts: &TimeSeries<T>, k: usize) -> Result<EstimateSequence<T>> {
    let n = ts.len();
    if k == 0 {
        return Err(Error::InvalidArgument("autocorrelation lag must be >= 1".into()));
    }
    check_lag(k, n)?;
    let first = k + 2;
    let floor = variance_floor(ts.values());
    let mut tr = LagTracker::new(ts.centered(), vec![0, k]);
    tr.advance_to(first - 1);
    let mut out = Vec::with_capacity(n - first + 1);
    for t in first..=n {
        tr.advance();
        let g0 = tr.autocov(0, Divisor::FullN);
        if g0 <= floor {
            return Err(Error::DegenerateVariance(t));
        }
        out.push(tr.autocov(1, Divisor::FullN) / g0);
    }
    EstimateSequence::from_scalars(n, first, out)
}

/// Full-sample autocorrelation at lag `k`, two-pass.
pub fn sample_autocorr<T: Scalar>(x: &[T], k: usize) -> Result<T> {
    let g0 = sample_autocov(x, 0, Divisor::FullN);
    if g0 <= variance_floor(x) {
        return Err(Error::DegenerateVariance(x.len()));
    }
    Ok(sample_autocov(x, k, Divisor::FullN) / g0)
}

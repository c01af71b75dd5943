//! Moving block bootstrap intervals: percentile of the unstudentized root,
//! normal with a bootstrap variance, and a bootstrapped critical value for
//! the self-normalized pivot.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::noncorr::check_level;
use crate::rng::{stream_hash, RngStream};
use crate::scalar::Scalar;
use crate::selfnorm::{sn_region, wn_matrix, SelfNormResult};
use crate::series::TimeSeries;
use crate::stats::{normal_quantile, quantile, sample_variance};

/// Extra draws allowed per resample when the statistic is undefined on it.
pub const MAX_REDRAWS: usize = 5;
/// Largest tolerated fraction of resamples skipped after redraws.
pub const MAX_SKIP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MbbConfig {
    pub block_length: usize,
    pub replications: usize,
    pub seed: u64,
}

impl MbbConfig {
    pub fn new(block_length: usize, replications: usize, seed: u64) -> Self {
        Self {
            block_length,
            replications,
            seed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.block_length == 0 || self.block_length > n {
            return Err(Error::BlockTooLong {
                l: self.block_length,
                n,
            });
        }
        if self.replications < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 bootstrap replications, got {}",
                self.replications
            )));
        }
        Ok(())
    }

    fn stream(&self, b: usize, attempt: usize) -> RngStream {
        RngStream::new(
            self.seed,
            stream_hash(&[self.block_length as u64, b as u64, attempt as u64]),
        )
    }
}

/// `ceil(n / l)` block starts, zero-based, uniform on `0..=n-l`.
pub fn mbb_starts<R: Rng + ?Sized>(n: usize, l: usize, rng: &mut R) -> Result<Vec<usize>> {
    if l == 0 || l > n {
        return Err(Error::BlockTooLong { l, n });
    }
    let blocks = n.div_ceil(l);
    Ok((0..blocks).map(|_| rng.random_range(0..=n - l)).collect())
}

/// Concatenates the blocks `x[s..s+l]` and keeps the first `n` values.
pub fn mbb_from_starts<T: Scalar>(ts: &TimeSeries<T>, l: usize, starts: &[usize]) -> Result<TimeSeries<T>> {
    let n = ts.len();
    if l == 0 || l > n {
        return Err(Error::BlockTooLong { l, n });
    }
    if let Some(&s) = starts.iter().find(|&&s| s + l > n) {
        return Err(Error::InvalidArgument(format!(
            "block start {s} leaves fewer than {l} observations"
        )));
    }
    let mut out = Vec::with_capacity(starts.len() * l);
    for &s in starts {
        out.extend_from_slice(&ts[s..s + l]);
    }
    if out.len() < n {
        return Err(Error::InvalidArgument(format!(
            "{} blocks of length {l} cover fewer than {n} observations",
            starts.len()
        )));
    }
    out.truncate(n);
    TimeSeries::new(out)
}

pub fn mbb_resample<T: Scalar, R: Rng + ?Sized>(ts: &TimeSeries<T>, l: usize, rng: &mut R) -> Result<TimeSeries<T>> {
    let starts = mbb_starts(ts.len(), l, rng)?;
    mbb_from_starts(ts, l, &starts)
}

/// Quantities a bootstrap run must produce on every kept resample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schemes {
    pub roots: bool,
    pub pivots: bool,
}

impl Schemes {
    pub const ALL: Schemes = Schemes {
        roots: true,
        pivots: true,
    };
    pub const ROOTS: Schemes = Schemes {
        roots: true,
        pivots: false,
    };
    pub const PIVOTS: Schemes = Schemes {
        roots: false,
        pivots: true,
    };
}

/// Bootstrap draws of `sqrt(N)(theta* - theta)` (scalar statistics) and of
/// the self-normalized pivot `N (theta* - theta)' W*^{-1} (theta* - theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MbbRun<T> {
    pub estimate: Vec<T>,
    pub n: usize,
    pub roots: Vec<T>,
    pub pivots: Vec<T>,
    pub skipped: usize,
}

/// Symmetric-or-not interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval<T> {
    pub estimate: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> Interval<T> {
    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, theta: T) -> bool {
        self.lower <= theta && theta <= self.upper
    }
}

enum Draw<T> {
    Kept(Option<T>, Option<T>),
    Skipped,
}

fn one_draw<T: Scalar>(
    ts: &TimeSeries<T>,
    spec: &EstimatorSpec,
    cfg: &MbbConfig,
    theta: &[T],
    schemes: Schemes,
    b: usize,
) -> Draw<T> {
    let n = ts.len();
    let nf = T::from_count(n);
    for attempt in 0..=MAX_REDRAWS {
        let mut rng = cfg.stream(b, attempt).rng();
        let Ok(star) = mbb_resample(ts, cfg.block_length, &mut rng) else {
            continue;
        };
        let Ok(seq) = spec.prefix(&star) else {
            continue;
        };
        let last = seq.last();
        let root = schemes.roots.then(|| nf.sqrt() * (last[0] - theta[0]));
        if !schemes.pivots {
            return Draw::Kept(root, None);
        }
        let Ok(w) = wn_matrix(&seq) else {
            continue;
        };
        let Ok(chol) = w.cholesky() else {
            continue;
        };
        let d: Vec<T> = last.iter().zip(theta).map(|(&a, &b)| a - b).collect();
        let pivot = nf * chol.inv_quadratic_form(&d);
        if pivot.is_finite() {
            return Draw::Kept(root, Some(pivot));
        }
    }
    Draw::Skipped
}

/// Draws `cfg.replications` resamples, redrawing up to five times when the
/// statistic or `W*` is undefined and skipping after that.
pub fn mbb_run<T: Scalar>(
    ts: &TimeSeries<T>,
    spec: &EstimatorSpec,
    cfg: &MbbConfig,
    schemes: Schemes,
) -> Result<MbbRun<T>> {
    let n = ts.len();
    cfg.validate(n)?;
    spec.validate()?;
    if schemes.roots && spec.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: spec.dim(),
        });
    }
    let theta = spec.estimate(ts)?;
    let draws: Vec<Draw<T>> = (0..cfg.replications)
        .into_par_iter()
        .map(|b| one_draw(ts, spec, cfg, &theta, schemes, b))
        .collect();
    let mut run = MbbRun {
        estimate: theta,
        n,
        roots: Vec::new(),
        pivots: Vec::new(),
        skipped: 0,
    };
    for d in draws {
        match d {
            Draw::Kept(r, p) => {
                run.roots.extend(r);
                run.pivots.extend(p);
            }
            Draw::Skipped => run.skipped += 1,
        }
    }
    if run.skipped as f64 > MAX_SKIP_FRACTION * cfg.replications as f64 {
        return Err(Error::TooManyDegenerateResamples {
            skipped: run.skipped,
            total: cfg.replications,
        });
    }
    Ok(run)
}

impl<T: Scalar> MbbRun<T> {
    fn root_scale(&self) -> T {
        T::from_count(self.n).sqrt()
    }

    /// `[theta - q*_{1-a/2} / sqrt(N), theta - q*_{a/2} / sqrt(N)]`.
    pub fn percentile(&self, level: f64) -> Result<Interval<T>> {
        check_level(level)?;
        if self.roots.is_empty() {
            return Err(Error::InvalidArgument("run has no bootstrap roots".into()));
        }
        let a = 1.0 - level;
        let hi = quantile(&self.roots, 1.0 - a / 2.0);
        let lo = quantile(&self.roots, a / 2.0);
        let s = self.root_scale();
        let est = self.estimate[0];
        Ok(Interval {
            estimate: est,
            lower: est - hi / s,
            upper: est - lo / s,
        })
    }

    /// `theta -/+ z_{1-a/2} sigma / sqrt(N)` with `sigma^2` the sample
    /// variance of the roots.
    pub fn normal(&self, level: f64) -> Result<Interval<T>> {
        check_level(level)?;
        if self.roots.len() < 2 {
            return Err(Error::InvalidArgument("run has no bootstrap roots".into()));
        }
        let sigma = sample_variance(&self.roots).sqrt();
        let z = T::lit(normal_quantile(1.0 - (1.0 - level) / 2.0));
        let half = z * sigma / self.root_scale();
        let est = self.estimate[0];
        Ok(Interval {
            estimate: est,
            lower: est - half,
            upper: est + half,
        })
    }

    pub fn sigma_sq(&self) -> T {
        sample_variance(&self.roots)
    }

    /// Bootstrap critical value `U*`, the `level` quantile of the pivots.
    pub fn u_star(&self, level: f64) -> Result<T> {
        check_level(level)?;
        if self.pivots.is_empty() {
            return Err(Error::InvalidArgument("run has no bootstrap pivots".into()));
        }
        Ok(quantile(&self.pivots, level))
    }

    /// The self-normalized region of `ts` inverted at `U*`.
    pub fn sn(&self, ts: &TimeSeries<T>, spec: &EstimatorSpec, level: f64) -> Result<SelfNormResult<T>> {
        let u = self.u_star(level)?;
        sn_region(&spec.prefix(ts)?, level, u)
    }
}

pub fn mbb_percentile_ci<T: Scalar>(
    ts: &TimeSeries<T>,
    spec: &EstimatorSpec,
    cfg: &MbbConfig,
    level: f64,
) -> Result<Interval<T>> {
    check_level(level)?;
    mbb_run(ts, spec, cfg, Schemes::ROOTS)?.percentile(level)
}

pub fn mbb_variance_normal_ci<T: Scalar>(
    ts: &TimeSeries<T>,
    spec: &EstimatorSpec,
    cfg: &MbbConfig,
    level: f64,
) -> Result<Interval<T>> {
    check_level(level)?;
    mbb_run(ts, spec, cfg, Schemes::ROOTS)?.normal(level)
}

pub fn mbb_sn_ci<T: Scalar>(
    ts: &TimeSeries<T>,
    spec: &EstimatorSpec,
    cfg: &MbbConfig,
    level: f64,
) -> Result<SelfNormResult<T>> {
    check_level(level)?;
    mbb_run(ts, spec, cfg, Schemes::PIVOTS)?.sn(ts, spec, level)
}

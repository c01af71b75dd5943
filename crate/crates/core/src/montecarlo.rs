//! Monte Carlo experiments: empirical size, size-adjusted power and interval
//! coverage, reported per cell with binomial standard errors.
//!
//! Replication `r` of a configuration with sample size `n` always draws its
//! data from the stream `(master_seed, hash(n, r))`. Streams are therefore
//! shared across methods, across models and between an alternative and its
//! null companion, and a rerun reproduces every cell exactly whatever the
//! number of rayon workers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::{mbb_run, MbbConfig, Schemes};
use crate::critvals;
use crate::dgp::{Ar1Innovation, ModelSpec};
use crate::error::{Error, Result};
use crate::estimators::{Divisor, EstimatorSpec};
use crate::noncorr::{efficient_ci, EfficientTarget, NoncorrMethod, MIN_EXCESS};
use crate::rng::{label_hash, stream_hash, RngStream};
use crate::selfnorm::sn_region;
use crate::series::TimeSeries;
use crate::stats::{chi2_critical, quantile_sorted, sort_floats};

pub const MIN_REPLICATIONS: usize = 100;
pub const DEFAULT_BOOTSTRAP_REPS: usize = 1000;
pub const DEFAULT_MASTER_SEED: u64 = 20_100_915;

/// Inference procedure evaluated in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    /// Self-normalized test or interval.
    Sn,
    Lobato,
    /// Prewhitened Newey-West studentized test.
    Nw,
    /// Normal interval with a consistent long-run variance.
    Efficient,
    MbbPct,
    MbbNormal,
    /// Self-normalized interval calibrated by the block bootstrap.
    MbbSn,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Sn,
        Method::Lobato,
        Method::Nw,
        Method::Efficient,
        Method::MbbPct,
        Method::MbbNormal,
        Method::MbbSn,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Sn => "sn",
            Method::Lobato => "lobato",
            Method::Nw => "nw",
            Method::Efficient => "efficient",
            Method::MbbPct => "mbb-pct",
            Method::MbbNormal => "mbb-normal",
            Method::MbbSn => "mbb-sn",
        }
    }

    /// Test statistic behind this method in size and power experiments.
    pub fn noncorr(&self) -> Option<NoncorrMethod> {
        match self {
            Method::Sn => Some(NoncorrMethod::SnRecursive),
            Method::Lobato => Some(NoncorrMethod::Lobato),
            Method::Nw => Some(NoncorrMethod::NwStudentized),
            _ => None,
        }
    }

    pub fn is_bootstrap(&self) -> bool {
        matches!(self, Method::MbbPct | Method::MbbNormal | Method::MbbSn)
    }

    fn builds_intervals(&self) -> bool {
        matches!(self, Method::Sn | Method::Efficient) || self.is_bootstrap()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown method {s:?}; expected one of sn, lobato, nw, efficient, mbb-pct, mbb-normal, mbb-sn"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    Size,
    Power { size_adjust: bool },
    Coverage,
}

/// One model at one sample size. Tests use `lags` and read `levels` as
/// significance levels; interval methods use `estimators` and read `levels`
/// as confidence levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    #[serde(serialize_with = "serialize_specs")]
    pub estimators: Vec<EstimatorSpec>,
    pub lags: Vec<usize>,
    pub levels: Vec<f64>,
    pub block_lengths: Vec<usize>,
    pub bootstrap_reps: usize,
    pub master_seed: u64,
    /// Replaces every nominal critical value; `f64::INFINITY` never rejects
    /// and yields whole-line intervals.
    pub critval_override: Option<f64>,
}

fn serialize_specs<S: serde::Serializer>(specs: &[EstimatorSpec], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(specs.iter().map(|e| e.to_string()))
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec, n: usize, replications: usize, methods: Vec<Method>) -> Self {
        Self {
            model,
            n,
            replications,
            methods,
            estimators: Vec::new(),
            lags: Vec::new(),
            levels: Vec::new(),
            block_lengths: Vec::new(),
            bootstrap_reps: DEFAULT_BOOTSTRAP_REPS,
            master_seed: DEFAULT_MASTER_SEED,
            critval_override: None,
        }
    }

    pub fn with_lags(mut self, lags: &[usize]) -> Self {
        self.lags = lags.to_vec();
        self
    }

    pub fn with_estimators(mut self, specs: &[EstimatorSpec]) -> Self {
        self.estimators = specs.to_vec();
        self
    }

    pub fn with_levels(mut self, levels: &[f64]) -> Self {
        self.levels = levels.to_vec();
        self
    }

    pub fn with_blocks(mut self, blocks: &[usize], bootstrap_reps: usize) -> Self {
        self.block_lengths = blocks.to_vec();
        self.bootstrap_reps = bootstrap_reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_REPLICATIONS} replications, got {}",
                self.replications
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods given".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidArgument("no levels given".into()));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::InvalidArgument(format!("level {l} outside (0, 1)")));
        }
        if let Some(c) = self.critval_override {
            if c.is_nan() || c < 0.0 {
                return Err(Error::InvalidArgument(format!("critical value {c} must be >= 0")));
            }
        }
        match kind {
            ExperimentKind::Size | ExperimentKind::Power { .. } => self.validate_tests(),
            ExperimentKind::Coverage => self.validate_coverage(),
        }
    }

    fn validate_tests(&self) -> Result<()> {
        if let Some(m) = self.methods.iter().find(|m| m.noncorr().is_none()) {
            return Err(Error::InvalidArgument(format!(
                "{m} is not a test; size and power take sn, lobato or nw"
            )));
        }
        if self.lags.is_empty() {
            return Err(Error::InvalidArgument("no lags given".into()));
        }
        for &k in &self.lags {
            if k == 0 || k > critvals::MAX_Q {
                return Err(Error::InvalidArgument(format!(
                    "lag count {k} outside 1..={}",
                    critvals::MAX_Q
                )));
            }
            if self.n <= k + MIN_EXCESS {
                return Err(Error::TooShort {
                    n: self.n,
                    min: k + MIN_EXCESS + 1,
                });
            }
        }
        Ok(())
    }

    fn validate_coverage(&self) -> Result<()> {
        if let Some(m) = self.methods.iter().find(|m| !m.builds_intervals()) {
            return Err(Error::InvalidArgument(format!(
                "{m} builds no interval; coverage takes sn, efficient and mbb methods"
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators given".into()));
        }
        let boot = self.methods.iter().any(Method::is_bootstrap);
        if boot && self.block_lengths.is_empty() {
            return Err(Error::InvalidArgument("bootstrap methods need block lengths".into()));
        }
        for &l in &self.block_lengths {
            MbbConfig::new(l, self.bootstrap_reps, 0).validate(self.n)?;
        }
        for spec in &self.estimators {
            spec.validate()?;
            if spec.first_valid() + 1 > self.n {
                return Err(Error::TooShort {
                    n: self.n,
                    min: spec.first_valid() + 1,
                });
            }
            let truth = self.model.truth(spec).ok_or_else(|| {
                Error::InvalidArgument(format!("no true value of {spec} for model {}", self.model))
            })?;
            if truth.len() != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    got: truth.len(),
                });
            }
            for m in &self.methods {
                let ok = match m {
                    Method::Efficient => efficient_target(spec).is_some(),
                    Method::MbbPct | Method::MbbNormal => spec.dim() == 1,
                    _ => true,
                };
                if !ok {
                    return Err(Error::InvalidArgument(format!("{m} does not support {spec}")));
                }
            }
        }
        Ok(())
    }

    /// Data stream of replication `rep`.
    pub fn stream(&self, rep: usize) -> RngStream {
        RngStream::for_replication(self.master_seed, stream_hash(&[self.n as u64]), rep as u64)
    }

    fn bootstrap_seed(&self, rep: usize, spec: &EstimatorSpec, l: usize) -> u64 {
        stream_hash(&[
            self.master_seed,
            self.n as u64,
            rep as u64,
            label_hash(&spec.to_string()),
            l as u64,
        ])
    }

    fn generate(&self, model: &ModelSpec, rep: usize) -> Result<TimeSeries<f64>> {
        model.generate(self.n, &mut self.stream(rep).rng())
    }
}

fn efficient_target(spec: &EstimatorSpec) -> Option<EfficientTarget> {
    match spec {
        EstimatorSpec::AutoCov {
            lag: 1,
            divisor: Divisor::FullN,
        } => Some(EfficientTarget::Gamma1),
        EstimatorSpec::AutoCorr { lag: 1 } => Some(EfficientTarget::Rho1),
        _ => None,
    }
}

/// One cell of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: String,
    pub n: usize,
    /// Estimator label, or `lags:K` for a test on the first `K` lags.
    pub target: String,
    pub method: String,
    pub level_or_alpha: f64,
    /// Rejection or coverage percentage over replications that succeeded.
    pub value_pct: f64,
    /// `100 sqrt(p (1 - p) / R)` with `R` the successful replications.
    pub se_pct: f64,
    pub mean_width: Option<f64>,
    pub block_length: Option<usize>,
    /// Critical value applied to every replication, when there is one.
    pub critval: Option<f64>,
    pub replications: usize,
    pub failures: usize,
    pub empty_intervals: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// First row matching the given coordinates.
    pub fn find(
        &self,
        target: &str,
        method: Method,
        level_or_alpha: f64,
        block_length: Option<usize>,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.target == target
                && r.method == method.label()
                && (r.level_or_alpha - level_or_alpha).abs() < 1e-12
                && r.block_length == block_length
        })
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
    }
}

/// Running totals for a cell.
#[derive(Debug, Clone, Default)]
struct Tally {
    hits: usize,
    valid: usize,
    failures: usize,
    empty: usize,
    width_sum: f64,
    widths: usize,
}

impl Tally {
    fn percent(&self) -> (f64, f64) {
        if self.valid == 0 {
            return (f64::NAN, f64::NAN);
        }
        let p = self.hits as f64 / self.valid as f64;
        (100.0 * p, 100.0 * (p * (1.0 - p) / self.valid as f64).sqrt())
    }

    fn mean_width(&self) -> Option<f64> {
        (self.widths > 0).then(|| self.width_sum / self.widths as f64)
    }
}

fn row(cfg: &ExperimentConfig, target: String, method: Method, level: f64, block: Option<usize>, critval: Option<f64>, t: &Tally) -> ReportRow {
    let (value_pct, se_pct) = t.percent();
    ReportRow {
        model: cfg.model.to_string(),
        n: cfg.n,
        target,
        method: method.label().to_string(),
        level_or_alpha: level,
        value_pct,
        se_pct,
        mean_width: t.mean_width(),
        block_length: block,
        critval,
        replications: t.valid,
        failures: t.failures,
        empty_intervals: t.empty,
    }
}

/// Nominal critical value of a test at `(K, alpha)`.
fn test_critval(cfg: &ExperimentConfig, method: NoncorrMethod, k: usize, alpha: f64) -> Result<f64> {
    if let Some(c) = cfg.critval_override {
        return Ok(c);
    }
    match method {
        NoncorrMethod::NwStudentized => Ok(chi2_critical(k, alpha)),
        _ => critvals::critval(k, alpha),
    }
}

/// Test statistics per replication, indexed `[rep][lag][method]`.
fn test_statistics(cfg: &ExperimentConfig, model: &ModelSpec) -> Vec<Vec<Vec<Option<f64>>>> {
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let ts = cfg.generate(model, rep).ok();
            cfg.lags
                .iter()
                .map(|&k| {
                    cfg.methods
                        .iter()
                        .map(|m| {
                            let ts = ts.as_ref()?;
                            let nc = m.noncorr().expect("validated");
                            nc.statistic(ts, k).ok().filter(|s| s.is_finite())
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn rejection_report(
    cfg: &ExperimentConfig,
    stats: &[Vec<Vec<Option<f64>>>],
    critval_for: impl Fn(usize, usize, f64) -> Result<f64>,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    for (ki, &k) in cfg.lags.iter().enumerate() {
        for (mi, &m) in cfg.methods.iter().enumerate() {
            for &alpha in &cfg.levels {
                let c = critval_for(ki, mi, alpha)?;
                let mut t = Tally::default();
                for rep in stats {
                    match rep[ki][mi] {
                        Some(s) => {
                            t.valid += 1;
                            t.hits += usize::from(s > c);
                        }
                        None => t.failures += 1,
                    }
                }
                report
                    .rows
                    .push(row(cfg, format!("lags:{k}"), m, alpha, None, Some(c), &t));
            }
        }
    }
    Ok(report)
}

/// Rejection percentages at the nominal critical values. The model should
/// have zero autocorrelation at every tested lag.
pub fn run_size_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate(ExperimentKind::Size)?;
    let stats = test_statistics(cfg, &cfg.model);
    rejection_report(cfg, &stats, |ki, mi, alpha| {
        test_critval(cfg, cfg.methods[mi].noncorr().expect("validated"), cfg.lags[ki], alpha)
    })
}

/// Rejection percentages under the alternative. With `size_adjust`, the
/// critical value of each cell is the empirical `1 - alpha` quantile of the
/// statistic under [`ModelSpec::null_companion`] on the same streams.
pub fn run_power_experiment(cfg: &ExperimentConfig, size_adjust: bool) -> Result<ExperimentReport> {
    cfg.validate(ExperimentKind::Power { size_adjust })?;
    let stats = test_statistics(cfg, &cfg.model);
    if !size_adjust {
        return rejection_report(cfg, &stats, |ki, mi, alpha| {
            test_critval(cfg, cfg.methods[mi].noncorr().expect("validated"), cfg.lags[ki], alpha)
        });
    }
    let null = test_statistics(cfg, &cfg.model.null_companion());
    let mut sorted = vec![vec![Vec::new(); cfg.methods.len()]; cfg.lags.len()];
    for rep in &null {
        for (ki, per_lag) in rep.iter().enumerate() {
            for (mi, s) in per_lag.iter().enumerate() {
                sorted[ki][mi].extend(*s);
            }
        }
    }
    for per_lag in &mut sorted {
        for v in per_lag.iter_mut() {
            sort_floats(v);
        }
    }
    rejection_report(cfg, &stats, |ki, mi, alpha| {
        if let Some(c) = cfg.critval_override {
            return Ok(c);
        }
        let v = &sorted[ki][mi];
        if v.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no valid null statistics for {} at K = {}",
                cfg.methods[mi], cfg.lags[ki]
            )));
        }
        Ok(quantile_sorted(v, 1.0 - alpha))
    })
}

/// Result of one interval in one replication.
#[derive(Debug, Clone, Copy)]
struct Cover {
    covered: bool,
    width: Option<f64>,
    empty: bool,
}

#[derive(Debug, Clone)]
struct CoverCell {
    target: usize,
    method: Method,
    level: f64,
    block: Option<usize>,
}

fn coverage_cells(cfg: &ExperimentConfig) -> Vec<CoverCell> {
    let mut cells = Vec::new();
    for target in 0..cfg.estimators.len() {
        for &method in &cfg.methods {
            let blocks: Vec<Option<usize>> = if method.is_bootstrap() {
                cfg.block_lengths.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for block in blocks {
                for &level in &cfg.levels {
                    cells.push(CoverCell {
                        target,
                        method,
                        level,
                        block,
                    });
                }
            }
        }
    }
    cells
}

fn interval_cover(lower: f64, upper: f64, truth: f64) -> Cover {
    Cover {
        covered: lower <= truth && truth <= upper,
        width: Some(upper - lower),
        empty: lower > upper,
    }
}

/// Intervals of one replication, in the order of `cells`.
fn coverage_replication(
    cfg: &ExperimentConfig,
    cells: &[CoverCell],
    truths: &[Vec<f64>],
    sn_crit: &[Vec<f64>],
    rep: usize,
) -> Vec<Option<Cover>> {
    let Ok(ts) = cfg.generate(&cfg.model, rep) else {
        return vec![None; cells.len()];
    };
    let mut out = vec![None; cells.len()];
    for (ti, spec) in cfg.estimators.iter().enumerate() {
        let truth = &truths[ti];
        let mine = |m: Method| cells.iter().enumerate().filter(move |(_, c)| c.target == ti && c.method == m);

        if cfg.methods.contains(&Method::Sn) {
            if let Ok(seq) = spec.prefix(&ts) {
                for (ci, cell) in mine(Method::Sn) {
                    let li = cfg.levels.iter().position(|&l| l == cell.level).expect("cell level");
                    out[ci] = sn_region(&seq, cell.level, sn_crit[ti][li]).ok().and_then(|r| {
                        Some(Cover {
                            covered: r.contains(truth).ok()?,
                            width: r.width(),
                            empty: false,
                        })
                    });
                }
            }
        }

        if let Some(target) = efficient_target(spec) {
            for (ci, cell) in mine(Method::Efficient) {
                out[ci] = efficient_ci(&ts, target, cell.level)
                    .ok()
                    .map(|iv| interval_cover(iv.lower, iv.upper, truth[0]));
            }
        }

        let roots = cfg.methods.iter().any(|m| matches!(m, Method::MbbPct | Method::MbbNormal));
        let pivots = cfg.methods.contains(&Method::MbbSn);
        if !(roots || pivots) {
            continue;
        }
        let seq = if pivots { spec.prefix(&ts).ok() } else { None };
        for &l in &cfg.block_lengths {
            let boot = MbbConfig::new(l, cfg.bootstrap_reps, cfg.bootstrap_seed(rep, spec, l));
            let Ok(run) = mbb_run(&ts, spec, &boot, Schemes { roots, pivots }) else {
                continue;
            };
            for (ci, cell) in cells.iter().enumerate() {
                if cell.target != ti || cell.block != Some(l) {
                    continue;
                }
                out[ci] = match cell.method {
                    Method::MbbPct => run.percentile(cell.level).ok().map(|iv| interval_cover(iv.lower, iv.upper, truth[0])),
                    Method::MbbNormal => run.normal(cell.level).ok().map(|iv| interval_cover(iv.lower, iv.upper, truth[0])),
                    Method::MbbSn => seq.as_ref().and_then(|seq| {
                        let u = run.u_star(cell.level).ok()?;
                        let r = sn_region(seq, cell.level, u).ok()?;
                        Some(Cover {
                            covered: r.contains(truth).ok()?,
                            width: r.width(),
                            empty: false,
                        })
                    }),
                    _ => None,
                };
            }
        }
    }
    out
}

/// Coverage percentage of the true parameter and mean width (scalar
/// targets) for every interval method, target, level and block length.
pub fn run_coverage_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate(ExperimentKind::Coverage)?;
    let truths: Vec<Vec<f64>> = cfg
        .estimators
        .iter()
        .map(|s| cfg.model.truth(s).expect("validated"))
        .collect();
    // Critical values are resolved before fanning out.
    let sn_crit: Vec<Vec<f64>> = cfg
        .estimators
        .iter()
        .map(|s| {
            cfg.levels
                .iter()
                .map(|&level| match cfg.critval_override {
                    Some(c) => Ok(c),
                    None if cfg.methods.contains(&Method::Sn) => critvals::critval(s.dim(), 1.0 - level),
                    None => Ok(f64::NAN),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let cells = coverage_cells(cfg);
    let outcomes: Vec<Vec<Option<Cover>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| coverage_replication(cfg, &cells, &truths, &sn_crit, rep))
        .collect();

    let mut report = ExperimentReport::default();
    for (ci, cell) in cells.iter().enumerate() {
        let mut t = Tally::default();
        for rep in &outcomes {
            match rep[ci] {
                Some(c) => {
                    t.valid += 1;
                    t.hits += usize::from(c.covered);
                    t.empty += usize::from(c.empty);
                    if let Some(w) = c.width {
                        t.width_sum += w;
                        t.widths += 1;
                    }
                }
                None => t.failures += 1,
            }
        }
        let critval = match cell.method {
            Method::Sn => {
                let li = cfg.levels.iter().position(|&l| l == cell.level).expect("cell level");
                Some(sn_crit[cell.target][li])
            }
            _ => None,
        };
        report.rows.push(row(
            cfg,
            cfg.estimators[cell.target].to_string(),
            cell.method,
            cell.level,
            cell.block,
            critval,
            &t,
        ));
    }
    Ok(report)
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match kind {
        ExperimentKind::Size => run_size_experiment(cfg),
        ExperimentKind::Power { size_adjust } => run_power_experiment(cfg, size_adjust),
        ExperimentKind::Coverage => run_coverage_experiment(cfg),
    }
}

/// Preset names accepted by [`table_spec`]: size (1a, 1b), size-adjusted
/// power (2a, 2b), coverage (3a to 5b) and block-bootstrap sweeps (fig1 to
/// fig4).
pub const TABLES: [&str; 14] = [
    "1a", "1b", "2a", "2b", "3a", "3b", "4a", "4b", "5a", "5b", "fig1", "fig2", "fig3", "fig4",
];

/// A named batch of configurations sharing one kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub configs: Vec<ExperimentConfig>,
}

impl TableSpec {
    pub fn run(&self) -> Result<ExperimentReport> {
        let mut report = ExperimentReport::default();
        for cfg in &self.configs {
            report.extend(run_experiment(self.kind, cfg)?);
        }
        Ok(report)
    }
}

/// `round(reps * scale)`, at least [`MIN_REPLICATIONS`].
pub fn scaled_reps(reps: usize, scale: f64) -> usize {
    ((reps as f64 * scale).round() as usize).max(MIN_REPLICATIONS)
}

fn size_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::IidNormal,
        ModelSpec::IidT6,
        ModelSpec::DemeanedLogNormal,
        ModelSpec::OneDependent,
        ModelSpec::Hetero12,
        ModelSpec::NonMds,
        ModelSpec::Garch11,
        ModelSpec::Bilinear,
    ]
}

fn family(range: std::ops::RangeInclusive<u8>) -> Vec<ModelSpec> {
    range.map(|i| ModelSpec::Family { index: i }).collect()
}

fn spec(s: &str) -> EstimatorSpec {
    s.parse().expect("built-in estimator label")
}

/// Configurations of a preset with its full replication counts
/// multiplied by `scale`.
pub fn table_spec(name: &str, scale: f64, master_seed: u64) -> Result<TableSpec> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let tests = [Method::Lobato, Method::Sn, Method::Nw];
    let lags = [1, 3, 5];
    let alphas = [0.05, 0.10];
    let coverage_levels = [0.90, 0.95];
    let sizes = [150, 600];
    let seeded = |c: ExperimentConfig| c.with_seed(master_seed);

    let coverage = |models: Vec<ModelSpec>, target: &str, methods: &[Method], reps: usize| -> Vec<ExperimentConfig> {
        let mut v = Vec::new();
        for m in models {
            for &n in &sizes {
                v.push(seeded(
                    ExperimentConfig::new(m, n, scaled_reps(reps, scale), methods.to_vec())
                        .with_estimators(&[spec(target)])
                        .with_levels(&coverage_levels),
                ));
            }
        }
        v
    };
    let power = |innovation: Ar1Innovation| -> Result<Vec<ExperimentConfig>> {
        [0.1, 0.2, 0.3, 0.4, 0.5]
            .iter()
            .map(|&rho| {
                Ok(seeded(
                    ExperimentConfig::new(ModelSpec::ar1(rho, innovation)?, 100, scaled_reps(5000, scale), tests.to_vec())
                        .with_lags(&lags)
                        .with_levels(&alphas),
                ))
            })
            .collect()
    };
    let figure = |target: &str, reps: usize| -> Result<Vec<ExperimentConfig>> {
        let blocks: Vec<usize> = (1..=15).collect();
        [0.0, 0.5, 0.8]
            .iter()
            .map(|&rho| {
                Ok(seeded(
                    ExperimentConfig::new(
                        ModelSpec::ar1(rho, Ar1Innovation::Normal)?,
                        50,
                        scaled_reps(reps, scale),
                        vec![Method::MbbPct, Method::MbbNormal, Method::MbbSn, Method::Sn],
                    )
                    .with_estimators(&[spec(target)])
                    .with_levels(&[0.95])
                    .with_blocks(&blocks, DEFAULT_BOOTSTRAP_REPS),
                ))
            })
            .collect()
    };

    let (kind, configs) = match name {
        "1a" | "1b" => {
            let n = if name == "1a" { 100 } else { 500 };
            let configs = size_models()
                .into_iter()
                .map(|m| {
                    seeded(
                        ExperimentConfig::new(m, n, scaled_reps(5000, scale), tests.to_vec())
                            .with_lags(&lags)
                            .with_levels(&alphas),
                    )
                })
                .collect();
            (ExperimentKind::Size, configs)
        }
        "2a" => (ExperimentKind::Power { size_adjust: true }, power(Ar1Innovation::Garch)?),
        "2b" => (ExperimentKind::Power { size_adjust: true }, power(Ar1Innovation::Bilinear)?),
        "3a" => (ExperimentKind::Coverage, coverage(family(1..=6), "acov:1", &[Method::Sn, Method::Efficient], 1000)),
        "3b" => (ExperimentKind::Coverage, coverage(family(1..=6), "specmean:pi/2", &[Method::Sn], 1000)),
        "4a" => (ExperimentKind::Coverage, coverage(family(1..=6), "acf:1", &[Method::Sn, Method::Efficient], 1000)),
        "4b" => (ExperimentKind::Coverage, coverage(family(1..=6), "specratio:pi/2", &[Method::Sn], 1000)),
        "5a" => (ExperimentKind::Coverage, coverage(family(1..=6), "median", &[Method::Sn], 10_000)),
        "5b" => {
            let mut v = coverage(family(1..=3), "ladar:1", &[Method::Sn], 1000);
            v.extend(coverage(family(7..=9), "ladar:2", &[Method::Sn], 1000));
            (ExperimentKind::Coverage, v)
        }
        "fig1" => (ExperimentKind::Coverage, figure("mean", 2000)?),
        "fig2" => (ExperimentKind::Coverage, figure("median", 2000)?),
        "fig3" => (ExperimentKind::Coverage, figure("acf:1", 2000)?),
        "fig4" => (ExperimentKind::Coverage, figure("specratio:pi/2", 500)?),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown table {name:?}; expected one of {}",
                TABLES.join(", ")
            )))
        }
    };
    Ok(TableSpec {
        name: name.to_string(),
        kind,
        configs,
    })
}

/// Replication cap of desk-scale presets; the fig presets keep their full
/// counts.
pub const DESK_MAX_REPLICATIONS: usize = 1000;

/// [`table_spec`] at desk scale: replication counts capped at
/// [`DESK_MAX_REPLICATIONS`] for tables.
pub fn desk_table_spec(name: &str, master_seed: u64) -> Result<TableSpec> {
    let mut spec = table_spec(name, 1.0, master_seed)?;
    if !name.starts_with("fig") {
        for cfg in &mut spec.configs {
            cfg.replications = cfg.replications.min(DESK_MAX_REPLICATIONS);
        }
    }
    Ok(spec)
}

pub fn run_table(name: &str, scale: f64, master_seed: u64) -> Result<ExperimentReport> {
    table_spec(name, scale, master_seed)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_size(model: ModelSpec) -> ExperimentConfig {
        ExperimentConfig::new(model, 120, 200, vec![Method::Sn, Method::Lobato, Method::Nw])
            .with_lags(&[1, 2])
            .with_levels(&[0.05, 0.10])
            .with_seed(11)
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn infinite_critval_never_rejects_and_always_covers() {
        let mut cfg = small_size(ModelSpec::IidNormal);
        cfg.critval_override = Some(f64::INFINITY);
        let rep = run_size_experiment(&cfg).unwrap();
        assert!(rep.rows.iter().all(|r| r.value_pct == 0.0 && r.se_pct == 0.0));

        let mut cov = ExperimentConfig::new(ModelSpec::Family { index: 1 }, 100, 100, vec![Method::Sn])
            .with_estimators(&[spec("mean"), spec("acf:1")])
            .with_levels(&[0.95]);
        cov.critval_override = Some(f64::INFINITY);
        let rep = run_coverage_experiment(&cov).unwrap();
        assert!(rep.rows.iter().all(|r| r.value_pct == 100.0 && r.empty_intervals == 0));
    }

    #[test]
    fn standard_errors_follow_binomial_formula() {
        let rep = run_size_experiment(&small_size(ModelSpec::IidNormal)).unwrap();
        for r in &rep.rows {
            let p = r.value_pct / 100.0;
            let se = 100.0 * (p * (1.0 - p) / r.replications as f64).sqrt();
            assert!((r.se_pct - se).abs() < 1e-12);
            assert!((0.0..=100.0).contains(&r.value_pct));
            assert_eq!(r.replications + r.failures, 200);
        }
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = small_size(ModelSpec::Garch11);
        assert_eq!(run_size_experiment(&cfg).unwrap(), run_size_experiment(&cfg).unwrap());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = ExperimentConfig::new(
            ModelSpec::ar1(0.5, Ar1Innovation::Normal).unwrap(),
            50,
            100,
            vec![Method::Sn, Method::MbbPct, Method::MbbSn],
        )
        .with_estimators(&[spec("mean")])
        .with_levels(&[0.9])
        .with_blocks(&[2, 5], 100);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_coverage_experiment(&cfg).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn null_alternative_power_matches_size() {
        let alt = ExperimentConfig::new(ModelSpec::ar1(0.0, Ar1Innovation::Normal).unwrap(), 100, 400, vec![Method::Sn])
            .with_lags(&[1])
            .with_levels(&[0.05]);
        let rep = run_power_experiment(&alt, true).unwrap();
        // Same streams under null and alternative: the empirical 95% quantile
        // is exceeded by at most 5% of the statistics.
        let r = &rep.rows[0];
        assert!(r.value_pct <= 5.0 + 1e-9 && r.value_pct >= 4.0, "{r:?}");
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = small_size(ModelSpec::IidNormal);
        cfg.replications = 50;
        assert!(run_size_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::new(ModelSpec::IidNormal, 30, 100, vec![Method::Sn])
            .with_lags(&[15])
            .with_levels(&[0.05]);
        assert!(run_size_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::new(ModelSpec::Family { index: 1 }, 100, 100, vec![Method::Efficient])
            .with_estimators(&[spec("mean")])
            .with_levels(&[0.95]);
        assert!(run_coverage_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::new(ModelSpec::Family { index: 1 }, 100, 100, vec![Method::Lobato])
            .with_estimators(&[spec("mean")])
            .with_levels(&[0.95]);
        assert!(run_coverage_experiment(&cfg).is_err());
        assert!(table_spec("9z", 1.0, 1).is_err());
    }

    #[test]
    fn table_specs_build() {
        for name in TABLES {
            let t = table_spec(name, 0.02, 5).unwrap();
            for cfg in &t.configs {
                cfg.validate(t.kind).unwrap();
                assert!(cfg.replications >= MIN_REPLICATIONS);
            }
        }
        assert_eq!(table_spec("1b", 1.0, 5).unwrap().configs[0].replications, 5000);
        assert_eq!(table_spec("fig4", 1.0, 5).unwrap().configs.len(), 3);
        assert_eq!(desk_table_spec("1b", 5).unwrap().configs[0].replications, 1000);
        assert_eq!(desk_table_spec("5a", 5).unwrap().configs[0].replications, 1000);
        assert_eq!(desk_table_spec("fig1", 5).unwrap().configs[0].replications, 2000);
    }

    #[test]
    fn csv_has_expected_header() {
        let rep = run_size_experiment(&small_size(ModelSpec::IidNormal)).unwrap();
        let csv = rep.to_csv();
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with(
            "model,n,target,method,level_or_alpha,value_pct,se_pct,mean_width,block_length"
        ));
        assert_eq!(csv.lines().count(), rep.rows.len() + 1);
    }
}

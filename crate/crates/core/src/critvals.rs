//! Simulated quantiles of `U_q = B(1)' V^{-1} B(1)` with
//! `V = int_0^1 (B(r) - r B(1))(B(r) - r B(1))' dr` and `B` a standard
//! `q`-dimensional Brownian motion.
//!
//! Tables are regenerated from `(q, grid, reps, seed)` on demand and cached
//! as JSON, one file per configuration.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::rng::{stream_hash, RngStream};
use crate::stats::{quantile_sorted, sort_floats};

pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_SEED: u64 = 20_100_601;
pub const DEFAULT_ALPHAS: [f64; 4] = [0.01, 0.025, 0.05, 0.10];
pub const MAX_Q: usize = 20;
pub const CACHE_ENV: &str = "SELFNORM_CRITVAL_CACHE";
/// Largest tolerated fraction of replications redrawn for a singular `V`.
pub const MAX_RESAMPLE_FRACTION: f64 = 0.001;
const MAX_REDRAWS: u64 = 16;

pub fn default_reps(q: usize) -> usize {
    if q <= 5 {
        200_000
    } else {
        50_000
    }
}

/// Simulation settings that determine a table bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UqSettings {
    pub q: usize,
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
}

impl UqSettings {
    pub fn new(q: usize, grid: usize, reps: usize, seed: u64) -> Self {
        Self {
            q,
            grid,
            reps,
            seed,
        }
    }

    pub fn default_for(q: usize) -> Self {
        Self::new(q, DEFAULT_GRID, default_reps(q), DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_Q).contains(&self.q) {
            return Err(Error::InvalidArgument(format!(
                "q must be in 1..={MAX_Q}, got {}",
                self.q
            )));
        }
        if self.grid < 100 {
            return Err(Error::InvalidArgument(format!(
                "grid must be >= 100, got {}",
                self.grid
            )));
        }
        if self.reps < 1000 {
            return Err(Error::InvalidArgument(format!(
                "replications must be >= 1000, got {}",
                self.reps
            )));
        }
        Ok(())
    }

    fn file_name(&self) -> String {
        format!(
            "uq_q{}_grid{}_reps{}_seed{}.json",
            self.q, self.grid, self.reps, self.seed
        )
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Upper quantiles `U_{q,alpha}` with the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritvalTable {
    pub q: usize,
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
    /// Keyed by [`alpha_key`].
    pub quantiles: BTreeMap<String, f64>,
    #[serde(skip)]
    pub resampled: usize,
    #[serde(skip)]
    pub sample: Option<Arc<Vec<f64>>>,
}

impl CritvalTable {
    pub fn settings(&self) -> UqSettings {
        UqSettings::new(self.q, self.grid, self.reps, self.seed)
    }

    pub fn get(&self, alpha: f64) -> Option<f64> {
        if let Some(v) = self.quantiles.get(&alpha_key(alpha)) {
            return Some(*v);
        }
        self.sample
            .as_ref()
            .map(|s| quantile_sorted(s, 1.0 - alpha))
    }

    /// `(alpha, U_{q,alpha})` in increasing `alpha`.
    pub fn entries(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self
            .quantiles
            .iter()
            .filter_map(|(k, &u)| k.parse().ok().map(|a| (a, u)))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// `alpha` rounded to 12 decimals, so `1.0 - 0.95` and `0.05` share a key.
pub fn alpha_key(alpha: f64) -> String {
    format!("{}", (alpha * 1e12).round() / 1e12)
}

/// `U` for one path given its Gaussian increments, row-major with `grid`
/// rows of `q` entries. Any positive rescaling of the increments cancels.
pub fn uq_statistic(increments: &[f64], q: usize) -> Result<f64> {
    let grid = increments.len() / q;
    if grid * q != increments.len() || grid == 0 {
        return Err(Error::DimensionMismatch {
            expected: q * grid.max(1),
            got: increments.len(),
        });
    }
    let mut cum = vec![0.0; (grid + 1) * q];
    for k in 0..grid {
        for j in 0..q {
            cum[(k + 1) * q + j] = cum[k * q + j] + increments[k * q + j];
        }
    }
    let end = &cum[grid * q..];
    let nf = grid as f64;
    if q == 1 {
        let s_end = end[0];
        let mut v = 0.0;
        for k in 0..grid {
            let b = cum[k] - (k as f64 / nf) * s_end;
            v += b * b;
        }
        if v <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        return Ok(nf * s_end * s_end / v);
    }
    let mut v = SquareMatrix::<f64>::zeros(q);
    let mut b = vec![0.0; q];
    for k in 0..grid {
        let r = k as f64 / nf;
        for j in 0..q {
            b[j] = cum[k * q + j] - r * end[j];
        }
        v.add_outer(&b, 1.0);
    }
    let form = v.cholesky()?.inv_quadratic_form(end);
    Ok(nf * form)
}

fn draw_replication(settings: &UqSettings, experiment: u64, rep: u64, buf: &mut Vec<f64>) -> (f64, bool) {
    let len = settings.grid * settings.q;
    for attempt in 0..MAX_REDRAWS {
        let index = stream_hash(&[experiment, rep, attempt]);
        let mut rng = RngStream::new(settings.seed, index).rng();
        buf.clear();
        buf.extend((0..len).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        if let Ok(u) = uq_statistic(buf, settings.q) {
            return (u, attempt > 0);
        }
    }
    (f64::NAN, true)
}

/// Sorted simulated draws of `U_q` and the number of redrawn replications.
pub fn simulate_uq_sample(settings: &UqSettings) -> Result<(Vec<f64>, usize)> {
    settings.validate()?;
    let experiment = stream_hash(&[0x5551, settings.q as u64, settings.grid as u64]);
    let draws: Vec<(f64, bool)> = (0..settings.reps as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, rep| draw_replication(settings, experiment, rep, buf))
        .collect();
    let resampled = draws.iter().filter(|d| d.1).count();
    if resampled as f64 > MAX_RESAMPLE_FRACTION * settings.reps as f64
        || draws.iter().any(|d| d.0.is_nan())
    {
        return Err(Error::TooManyResamples {
            resampled,
            total: settings.reps,
        });
    }
    let mut sample: Vec<f64> = draws.into_iter().map(|d| d.0).collect();
    sort_floats(&mut sample);
    Ok((sample, resampled))
}

/// Simulates `U_q` and tabulates its upper `alpha` quantiles.
pub fn simulate_uq(settings: &UqSettings, alphas: &[f64]) -> Result<CritvalTable> {
    for &a in alphas {
        check_alpha(a)?;
    }
    let (sample, resampled) = simulate_uq_sample(settings)?;
    let quantiles = alphas
        .iter()
        .map(|&a| (alpha_key(a), quantile_sorted(&sample, 1.0 - a)))
        .collect();
    Ok(CritvalTable {
        q: settings.q,
        grid: settings.grid,
        reps: settings.reps,
        seed: settings.seed,
        quantiles,
        resampled,
        sample: Some(Arc::new(sample)),
    })
}

/// Directory of cached tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CritvalCache {
    dir: PathBuf,
}

impl CritvalCache {
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$SELFNORM_CRITVAL_CACHE`, else the user cache directory.
    pub fn from_env() -> Self {
        if let Some(p) = std::env::var_os(CACHE_ENV).filter(|p| !p.is_empty()) {
            return Self::at(p);
        }
        let base = std::env::var_os("XDG_CACHE_HOME")
            .filter(|p| !p.is_empty())
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
            .unwrap_or_else(std::env::temp_dir);
        Self::at(base.join("selfnorm").join("critvals"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, settings: &UqSettings) -> PathBuf {
        self.dir.join(settings.file_name())
    }

    /// Reads a cached table; unreadable or mismatched files count as absent.
    pub fn load(&self, settings: &UqSettings) -> Option<CritvalTable> {
        let text = fs::read_to_string(self.path_for(settings)).ok()?;
        let table: CritvalTable = serde_json::from_str(&text).ok()?;
        (table.settings() == *settings).then_some(table)
    }

    /// Writes through a temporary file and a rename so readers never see a
    /// partial table.
    pub fn store(&self, table: &CritvalTable) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&table.settings());
        let tmp = self.dir.join(format!(
            ".{}.{}.tmp",
            table.settings().file_name(),
            std::process::id()
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(table.to_json().as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Cached table holding `alpha`, simulating and storing it when absent.
    /// A failed write leaves the simulated table usable.
    pub fn get_or_simulate(&self, settings: &UqSettings, alpha: f64) -> Result<CritvalTable> {
        check_alpha(alpha)?;
        settings.validate()?;
        if let Some(t) = self.load(settings) {
            if t.get(alpha).is_some() {
                return Ok(t);
            }
        }
        let mut alphas: Vec<f64> = DEFAULT_ALPHAS.to_vec();
        if let Some(old) = self.load(settings) {
            alphas.extend(old.entries().into_iter().map(|e| e.0));
        }
        alphas.push(alpha);
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let table = simulate_uq(settings, &alphas)?;
        let _ = self.store(&table);
        Ok(table)
    }
}

type Memo = Mutex<HashMap<UqSettings, CritvalTable>>;

fn memo() -> &'static Memo {
    static MEMO: OnceLock<Memo> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `U_{q,alpha}` under `settings`, served from memory, then the cache
/// directory, then simulation. The memo lock is not held while simulating,
/// so callers inside a rayon pool cannot deadlock on it.
pub fn critval_with(settings: &UqSettings, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    {
        let memo = memo().lock().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = memo.get(settings).and_then(|t| t.get(alpha)) {
            return Ok(v);
        }
    }
    let table = CritvalCache::from_env().get_or_simulate(settings, alpha)?;
    let v = table.get(alpha).expect("table holds requested alpha");
    let mut memo = memo().lock().unwrap_or_else(|e| e.into_inner());
    match memo.get_mut(settings) {
        Some(existing) if existing.sample.is_none() => *existing = table,
        Some(existing) => existing.quantiles.extend(table.quantiles),
        None => {
            memo.insert(*settings, table);
        }
    }
    Ok(v)
}

/// `U_{q,alpha}` at the default settings for `q`.
pub fn critval(q: usize, alpha: f64) -> Result<f64> {
    critval_with(&UqSettings::default_for(q), alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(q: usize, seed: u64) -> UqSettings {
        UqSettings::new(q, 200, 4000, seed)
    }

    #[test]
    fn homogeneous_in_increment_scale() {
        let mut rng = RngStream::new(5, 5).rng();
        for q in [1, 3] {
            let z: Vec<f64> = (0..300 * q).map(|_| StandardNormal.sample(&mut rng)).collect();
            let u = uq_statistic(&z, q).unwrap();
            for c in [0.01, 3.7, 1e4] {
                let zc: Vec<f64> = z.iter().map(|v| v * c).collect();
                let uc = uq_statistic(&zc, q).unwrap();
                assert!((u - uc).abs() <= 1e-9 * u, "q={q} c={c}");
            }
        }
    }

    #[test]
    fn numerator_is_chi_square_one() {
        let s = small(1, 9);
        let experiment = 77;
        let mut buf = Vec::new();
        let mut acc = 0.0;
        let reps = 20_000u64;
        for rep in 0..reps {
            let mut rng = RngStream::for_replication(s.seed, experiment, rep).rng();
            buf.clear();
            buf.extend((0..s.grid).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
            let b1 = buf.iter().sum::<f64>() / (s.grid as f64).sqrt();
            acc += b1 * b1;
        }
        let m = acc / reps as f64;
        assert!((m - 1.0).abs() < 0.03, "{m}");
    }

    #[test]
    fn deterministic_and_monotone() {
        let s = small(1, 3);
        let a = simulate_uq(&s, &DEFAULT_ALPHAS).unwrap();
        let b = simulate_uq(&s, &DEFAULT_ALPHAS).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let e = a.entries();
        assert!(e.windows(2).all(|w| w[0].1 > w[1].1));
        assert!(e.iter().all(|&(_, u)| u > 0.0));
    }

    #[test]
    fn validates_settings() {
        assert!(UqSettings::new(0, 1000, 1000, 1).validate().is_err());
        assert!(UqSettings::new(21, 1000, 1000, 1).validate().is_err());
        assert!(UqSettings::new(1, 99, 1000, 1).validate().is_err());
        assert!(UqSettings::new(1, 100, 999, 1).validate().is_err());
        assert!(simulate_uq(&small(1, 1), &[1.5]).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("selfnorm-cv-test-{}", std::process::id()));
        let cache = CritvalCache::at(&dir);
        let s = small(2, 4);
        assert!(cache.load(&s).is_none());
        let t = cache.get_or_simulate(&s, 0.2).unwrap();
        let loaded = cache.load(&s).unwrap();
        assert_eq!(loaded.quantiles, t.quantiles);
        assert!(loaded.get(0.2).is_some() && loaded.get(0.05).is_some());
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(cache.path_for(&s)).unwrap()).unwrap();
        for field in ["q", "grid", "reps", "seed", "quantiles"] {
            assert!(json.get(field).is_some(), "{field}");
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}

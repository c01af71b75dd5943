//! `selfnorm` command-line tool.
//!
//! Exit status is 0 on success, 1 on usage or validation errors and 2 on
//! numerical failures. Every run prints a reproduction command, with any
//! drawn seed filled in, to stderr.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use selfnorm::bootstrap::{mbb_run, MbbConfig, Schemes};
use selfnorm::critvals::{self, CritvalCache, UqSettings};
use selfnorm::dgp::ModelSpec;
use selfnorm::montecarlo::{
    desk_table_spec, run_experiment, table_spec, ExperimentConfig, ExperimentKind, ExperimentReport, Method,
    TableSpec, DEFAULT_BOOTSTRAP_REPS,
};
use selfnorm::noncorr::{efficient_ci, EfficientTarget, NoncorrMethod};
use selfnorm::{read_series, sn_region, Error, EstimatorSpec, Region, SelfNormResult, TimeSeries};

#[derive(Parser, Debug)]
#[command(name = "selfnorm", version, about = "Self-normalized inference for time series")]
struct Cli {
    /// Worker threads for Monte Carlo and bootstrap fan-out.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Confidence interval or region for a statistic of one series.
    Ci(CiArgs),
    /// Test that the first K autocorrelations are zero.
    TestNoncorr(TestArgs),
    /// Upper quantile of the self-normalized limit U_q.
    Critvals(CritArgs),
    /// Monte Carlo experiment, written as CSV.
    Simulate(SimArgs),
    /// Draw a series from a model, one value per line.
    Generate(GenArgs),
}

#[derive(Args, Debug)]
struct CiArgs {
    /// Statistic: mean, median, acov:K[:tilde], acf:K, specmean:X, specratio:X, ladar:P.
    #[arg(long, value_parser = parse_spec)]
    stat: EstimatorSpec,
    #[arg(long, default_value = "sn", value_parser = parse_ci_method)]
    method: Method,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Block length of the bootstrap methods.
    #[arg(long)]
    block: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_REPS)]
    boot_reps: usize,
    /// Bootstrap seed; drawn at random when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Critical value replacing U_{q,1-level} for the sn method.
    #[arg(long)]
    critval: Option<f64>,
    /// Input file, one observation per line; stdin when absent or `-`.
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "sn", value_parser = parse_test_method)]
    method: NoncorrMethod,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CritArgs {
    #[arg(long)]
    q: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = critvals::DEFAULT_GRID)]
    grid: usize,
    /// Simulated paths; the default depends on q.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = critvals::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Size,
    Power,
    PowerAdjusted,
    Coverage,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Preset experiment: 1a 1b 2a 2b 3a 3b 4a 4b 5a 5b fig1..fig4.
    #[arg(long, conflicts_with_all = ["kind", "model"])]
    table: Option<String>,
    /// Multiplier of the preset's full replication counts; desk scale when absent.
    #[arg(long, requires = "table")]
    scale: Option<f64>,
    /// Experiment kind of a custom run.
    #[arg(long, value_enum, requires = "model")]
    kind: Option<Kind>,
    #[arg(long, value_parser = parse_model, requires = "kind")]
    model: Option<ModelSpec>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "sn")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', value_parser = parse_spec)]
    stats: Vec<EstimatorSpec>,
    #[arg(long, value_delimiter = ',')]
    lags: Vec<usize>,
    /// Significance levels of tests or confidence levels of intervals.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<usize>,
    /// Bootstrap resamples per interval.
    #[arg(long)]
    boot_reps: Option<usize>,
    /// Master seed; drawn at random when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// iidn, t6, lognorm, onedep, hetero, nonmds, garch, bilinear, m1..m9 or ar1:RHO:INNOV.
    #[arg(long, value_parser = parse_model)]
    model: ModelSpec,
    #[arg(long)]
    n: usize,
    /// Seed; drawn at random when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_spec(s: &str) -> Result<EstimatorSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ci_method(s: &str) -> Result<Method, String> {
    let m = parse_method(s)?;
    if m.noncorr().is_some() && m != Method::Sn {
        return Err(format!("{m} is a test; use test-noncorr"));
    }
    Ok(m)
}

fn parse_test_method(s: &str) -> Result<NoncorrMethod, String> {
    NoncorrMethod::parse(s).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e.to_string()))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: --workers: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            let code = if e.is_validation() || matches!(e, Error::Io(_)) { 1 } else { 2 };
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Ci(a) => ci(a),
        Command::TestNoncorr(a) => test_noncorr(a),
        Command::Critvals(a) => critval(a),
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
    }
}

/// Prints `selfnorm <args>` to stderr, quoting arguments the shell would split.
fn echo(args: &[String]) {
    let quoted: Vec<String> = args
        .iter()
        .map(|a| {
            if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_.,:/=+".contains(c)) {
                a.clone()
            } else {
                format!("'{}'", a.replace('\'', r"'\''"))
            }
        })
        .collect();
    eprintln!("reproduce: selfnorm {}", quoted.join(" "));
}

fn input_arg(input: &Option<PathBuf>) -> Vec<String> {
    input.iter().map(|p| p.display().to_string()).collect()
}

fn read_input(input: &Option<PathBuf>) -> CliResult<TimeSeries<f64>> {
    match input {
        Some(p) if p != Path::new("-") => {
            let f = File::open(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Ok(read_series(BufReader::new(f))?)
        }
        _ => Ok(read_series(io::stdin().lock())?),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| rand::random::<u32>() as u64)
}

fn print_json(v: &Value) -> CliResult<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{v}")?;
    Ok(())
}

fn check_level(flag: &str, level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{flag} must be in (0, 1), got {level}")))
    }
}

fn sn_json(a: &CiArgs, res: &SelfNormResult<f64>) -> Value {
    let mut v = json!({
        "stat": a.stat.to_string(),
        "method": a.method.label(),
        "level": a.level,
        "critval": res.critval,
        "N": res.n_eff,
    });
    match &res.region {
        Region::Interval { lower, upper } => {
            v["estimate"] = json!(res.theta_hat[0]);
            v["L"] = json!(lower);
            v["U"] = json!(upper);
        }
        Region::Ellipsoid { shape, radius_sq, .. } => {
            v["estimate"] = json!(res.theta_hat);
            v["shape"] = json!(shape.rows());
            v["radius_sq"] = json!(radius_sq);
        }
    }
    v
}

fn interval_json(a: &CiArgs, estimate: f64, lower: f64, upper: f64, critval: Option<f64>, n: usize) -> Value {
    json!({
        "stat": a.stat.to_string(),
        "method": a.method.label(),
        "level": a.level,
        "estimate": estimate,
        "L": lower,
        "U": upper,
        "critval": critval,
        "N": n,
    })
}

fn ci(a: CiArgs) -> CliResult<()> {
    check_level("--level", a.level)?;
    let mut repro = vec![
        "ci".to_string(),
        "--stat".into(),
        a.stat.to_string(),
        "--method".into(),
        a.method.label().into(),
        "--level".into(),
        a.level.to_string(),
    ];
    if let Some(c) = a.critval {
        if a.method != Method::Sn {
            return Err(Failure::Usage("--critval applies to --method sn only".into()));
        }
        repro.extend(["--critval".into(), c.to_string()]);
    }
    let seed = a.method.is_bootstrap().then(|| resolve_seed(a.seed));
    if let Some(seed) = seed {
        let Some(l) = a.block else {
            return Err(Failure::Usage(format!("--block is required by --method {}", a.method)));
        };
        repro.extend([
            "--block".into(),
            l.to_string(),
            "--boot-reps".into(),
            a.boot_reps.to_string(),
            "--seed".into(),
            seed.to_string(),
        ]);
    }
    repro.extend(input_arg(&a.input));
    echo(&repro);

    let ts = read_input(&a.input)?;
    let n = ts.len();
    let out = match a.method {
        Method::Sn => {
            let crit = match a.critval {
                Some(c) => c,
                None => critvals::critval(a.stat.dim(), 1.0 - a.level)?,
            };
            let res = sn_region(&a.stat.prefix(&ts)?, a.level, crit)?;
            sn_json(&a, &res)
        }
        Method::Efficient => {
            let target = EfficientTarget::parse(&a.stat.to_string())?;
            let iv = efficient_ci(&ts, target, a.level)?;
            let mut v = interval_json(&a, iv.estimate, iv.lower, iv.upper, None, n);
            v["std_err"] = json!(iv.std_err);
            v["bandwidth"] = json!(iv.bandwidth);
            v
        }
        m => {
            let cfg = MbbConfig::new(a.block.expect("checked"), a.boot_reps, seed.expect("bootstrap seed"));
            let schemes = if m == Method::MbbSn { Schemes::PIVOTS } else { Schemes::ROOTS };
            let run = mbb_run(&ts, &a.stat, &cfg, schemes)?;
            let mut v = match m {
                Method::MbbPct => {
                    let iv = run.percentile(a.level)?;
                    interval_json(&a, iv.estimate, iv.lower, iv.upper, None, n)
                }
                Method::MbbNormal => {
                    let iv = run.normal(a.level)?;
                    interval_json(&a, iv.estimate, iv.lower, iv.upper, None, n)
                }
                _ => sn_json(&a, &run.sn(&ts, &a.stat, a.level)?),
            };
            v["block"] = json!(cfg.block_length);
            v["skipped"] = json!(run.skipped);
            v
        }
    };
    print_json(&out)
}

fn test_noncorr(a: TestArgs) -> CliResult<()> {
    check_level("--alpha", a.alpha)?;
    let mut repro = vec![
        "test-noncorr".to_string(),
        "--k".into(),
        a.k.to_string(),
        "--method".into(),
        a.method.label().into(),
        "--alpha".into(),
        a.alpha.to_string(),
    ];
    repro.extend(input_arg(&a.input));
    echo(&repro);
    if a.k == 0 || a.k > critvals::MAX_Q {
        return Err(Failure::Usage(format!("--k must be in 1..={}", critvals::MAX_Q)));
    }
    let ts = read_input(&a.input)?;
    let crit = a.method.critval(a.k, a.alpha)?;
    let res = a.method.test(&ts, a.k, crit)?;
    let mut v = serde_json::to_value(&res).expect("result serializes");
    v["method"] = json!(a.method.label());
    v["alpha"] = json!(a.alpha);
    v["N"] = json!(ts.len());
    print_json(&v)
}

fn critval(a: CritArgs) -> CliResult<()> {
    check_level("--alpha", a.alpha)?;
    let reps = a.reps.unwrap_or_else(|| critvals::default_reps(a.q));
    echo(&[
        "critvals".into(),
        "--q".into(),
        a.q.to_string(),
        "--alpha".into(),
        a.alpha.to_string(),
        "--grid".into(),
        a.grid.to_string(),
        "--reps".into(),
        reps.to_string(),
        "--seed".into(),
        a.seed.to_string(),
    ]);
    let settings = UqSettings::new(a.q, a.grid, reps, a.seed);
    settings.validate()?;
    let cache = CritvalCache::from_env();
    let table = cache.get_or_simulate(&settings, a.alpha)?;
    let value = table.get(a.alpha).expect("table holds alpha");
    let path = cache.path_for(&settings);
    print_json(&json!({
        "q": a.q,
        "alpha": a.alpha,
        "value": value,
        "grid": a.grid,
        "reps": reps,
        "seed": a.seed,
        "cache": path.exists().then(|| path.display().to_string()),
    }))
}

fn custom_experiment(a: &SimArgs, kind: Kind, model: ModelSpec, seed: u64) -> CliResult<TableSpec> {
    let default_levels = if kind == Kind::Coverage { vec![0.95] } else { vec![0.05] };
    let levels = if a.levels.is_empty() { default_levels } else { a.levels.clone() };
    let mut cfg = ExperimentConfig::new(model, a.n, a.reps, a.methods.clone())
        .with_estimators(&a.stats)
        .with_lags(&a.lags)
        .with_levels(&levels)
        .with_blocks(&a.blocks, a.boot_reps.unwrap_or(DEFAULT_BOOTSTRAP_REPS))
        .with_seed(seed);
    if kind != Kind::Coverage && cfg.lags.is_empty() {
        cfg.lags = vec![1];
    }
    let kind = match kind {
        Kind::Size => ExperimentKind::Size,
        Kind::Power => ExperimentKind::Power { size_adjust: false },
        Kind::PowerAdjusted => ExperimentKind::Power { size_adjust: true },
        Kind::Coverage => ExperimentKind::Coverage,
    };
    cfg.validate(kind)?;
    Ok(TableSpec {
        name: "custom".into(),
        kind,
        configs: vec![cfg],
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn simulate(a: SimArgs) -> CliResult<()> {
    let seed = resolve_seed(a.seed);
    let mut repro = vec!["simulate".to_string()];
    let mut spec = if let Some(name) = &a.table {
        repro.extend(["--table".into(), name.clone()]);
        match a.scale {
            Some(s) => {
                repro.extend(["--scale".into(), s.to_string()]);
                table_spec(name, s, seed)?
            }
            None => desk_table_spec(name, seed)?,
        }
    } else {
        let (Some(kind), Some(model)) = (a.kind, a.model) else {
            return Err(Failure::Usage("simulate needs --table, or --kind with --model".into()));
        };
        let spec = custom_experiment(&a, kind, model, seed)?;
        let cfg = &spec.configs[0];
        repro.extend([
            "--kind".into(),
            kind.to_possible_value().expect("named kind").get_name().to_string(),
            "--model".into(),
            model.to_string(),
            "--n".into(),
            cfg.n.to_string(),
            "--reps".into(),
            cfg.replications.to_string(),
            "--methods".into(),
            join(&cfg.methods),
            "--levels".into(),
            join(&cfg.levels),
        ]);
        if spec.kind == ExperimentKind::Coverage {
            repro.extend(["--stats".into(), join(&cfg.estimators)]);
        } else {
            repro.extend(["--lags".into(), join(&cfg.lags)]);
        }
        if !cfg.block_lengths.is_empty() {
            repro.extend(["--blocks".into(), join(&cfg.block_lengths)]);
        }
        spec
    };
    if let Some(b) = a.boot_reps {
        for cfg in &mut spec.configs {
            cfg.bootstrap_reps = b;
        }
        repro.extend(["--boot-reps".into(), b.to_string()]);
    }
    repro.extend(["--seed".into(), seed.to_string()]);
    if let Some(p) = &a.out {
        repro.extend(["--out".into(), p.display().to_string()]);
    }
    echo(&repro);

    let mut report = ExperimentReport::default();
    for cfg in &spec.configs {
        report.extend(run_experiment(spec.kind, cfg)?);
    }
    match &a.out {
        Some(p) => report.write_csv(BufWriter::new(File::create(p)?))?,
        None => report.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn generate(a: GenArgs) -> CliResult<()> {
    let seed = resolve_seed(a.seed);
    let mut repro = vec![
        "generate".to_string(),
        "--model".into(),
        a.model.to_string(),
        "--n".into(),
        a.n.to_string(),
        "--seed".into(),
        seed.to_string(),
    ];
    if let Some(p) = &a.out {
        repro.extend(["--out".into(), p.display().to_string()]);
    }
    echo(&repro);
    let ts = a.model.generate(a.n, &mut selfnorm::RngStream::new(seed, 0).rng())?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for v in ts.iter() {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

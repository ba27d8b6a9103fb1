//! Command-line front end. Every subcommand is a plain function returning
//! its output text, so it can be driven from tests as well as from `main`.
//!
//! Exit codes: 0 success, 2 input error, 3 construction failure,
//! 4 numeric failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::baselines::BaselineError;
use crate::counts::{load_histogram, FrequencyHistogram, HistogramError, RandomSource};
use crate::estimator::{construct, ConstructionReport, EstimatorError, DEFAULT_M_MAX};
use crate::methods::{FittedCurve, Method, MethodError};
use crate::simlab::{
    cv_empirical, population_for, relative_error, replicate_stream, run_experiment, sample_poisson,
    truth_grid, ExperimentConfig, ModelName, SimError,
};
use crate::uncertainty::{
    best_practice, bootstrap_curves, bootstrap_ensemble, summarize, BootstrapSummary, UncertaintyError,
    DEFAULT_LEVEL,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Construction(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<HistogramError> for CliError {
    fn from(e: HistogramError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        let msg = e.to_string();
        match e {
            EstimatorError::InvalidTime(_) | EstimatorError::InvalidMultiplicity => CliError::Input(msg),
            EstimatorError::InconsistentConjugates { .. } | EstimatorError::NotConjugateClosed => {
                CliError::Numeric(msg)
            }
            _ => CliError::Construction(msg),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        let msg = e.to_string();
        match e {
            BaselineError::InvalidTime(_) => CliError::Input(msg),
            BaselineError::NoConvergence(_) => CliError::Numeric(msg),
            _ => CliError::Construction(msg),
        }
    }
}

impl From<MethodError> for CliError {
    fn from(e: MethodError) -> Self {
        match e {
            MethodError::Estimator(e) => e.into(),
            MethodError::Baseline(e) => e.into(),
        }
    }
}

impl From<UncertaintyError> for CliError {
    fn from(e: UncertaintyError) -> Self {
        let msg = e.to_string();
        match e {
            UncertaintyError::InvalidLevel(_) | UncertaintyError::TooFewReplicates(_) => CliError::Input(msg),
            UncertaintyError::TooManyFailures { .. } => CliError::Construction(msg),
            UncertaintyError::NonPositivePoint(_) => CliError::Numeric(msg),
            UncertaintyError::Estimator(e) => e.into(),
            UncertaintyError::Baseline(e) => e.into(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let msg = e.to_string();
        match e {
            SimError::BadProbabilities(_) => CliError::Numeric(msg),
            _ => CliError::Input(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rsac", version, about = "Fit and extrapolate r-species accumulation curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the estimator from a histogram and print it as JSON.
    Fit(FitArgs),
    /// Evaluate a fitted curve on an r x t grid.
    Extrapolate(ExtrapolateArgs),
    /// Draw a population, sample it and write the histogram and exact curves.
    Simulate(SimulateArgs),
    /// Score methods against exact curves.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

/// `auto` applies the CV switch between the estimator and ZTNB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Fixed(Method),
}

fn parse_method_choice(s: &str) -> Result<MethodChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        Ok(MethodChoice::Auto)
    } else {
        s.parse().map(MethodChoice::Fixed)
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_model(s: &str) -> Result<ModelName, String> {
    s.parse().map_err(|e: SimError| e.to_string())
}

/// Sorted, de-duplicated multiplicities from a list such as `1,2,5-8`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexList(pub Vec<u32>);

pub fn parse_index_list(s: &str) -> Result<IndexList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || format!("invalid index list entry '{part}'");
        if let Some((a, b)) = part.split_once('-') {
            let a: u32 = a.trim().parse().map_err(|_| bad())?;
            let b: u32 = b.trim().parse().map_err(|_| bad())?;
            if a == 0 || b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            let v: u32 = part.parse().map_err(|_| bad())?;
            if v == 0 {
                return Err(bad());
            }
            out.push(v);
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err("index list is empty".into());
    }
    Ok(IndexList(out))
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Histogram file: one `multiplicity count` pair per line.
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtrapolateArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
    /// auto, rfa, ztp, ztnb, ls, bbc or cs.
    #[arg(long, default_value = "auto", value_parser = parse_method_choice)]
    pub method: MethodChoice,
    /// Multiplicities, e.g. `1,2` or `1-10`.
    #[arg(short, long, default_value = "1", value_parser = parse_index_list)]
    pub r: IndexList,
    /// Explicit comma-separated sampling efforts; overrides the range flags.
    #[arg(short, long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub t_start: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_stop: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_step: f64,
    /// Bootstrap replicates; adds se and interval columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "100")]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

impl ExtrapolateArgs {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            m_max: DEFAULT_M_MAX,
            method: MethodChoice::Auto,
            r: IndexList(vec![1]),
            t: None,
            t_start: 1.0,
            t_stop: 10.0,
            t_step: 1.0,
            bootstrap: None,
            level: DEFAULT_LEVEL,
            seed: 1,
            format: Format::Tsv,
            output: None,
        }
    }

    /// The requested t values in order.
    pub fn t_grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match &self.t {
            Some(ts) => ts.clone(),
            None => {
                let (a, b, h) = (self.t_start, self.t_stop, self.t_step);
                if !(h > 0.0 && a.is_finite() && b.is_finite() && b >= a) {
                    return Err(CliError::Input(format!("bad t range {a}..{b} step {h}")));
                }
                let n = ((b - a) / h + 1e-9).floor() as usize;
                (0..=n).map(|k| a + k as f64 * h).collect()
            }
        };
        if grid.is_empty() || grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(CliError::Input("t grid must be non-empty, finite and non-negative".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// P, NB1, NB2, LN, Z or ZM.
    #[arg(long, value_parser = parse_model)]
    pub model: ModelName,
    /// Population size L.
    #[arg(long, default_value_t = 100_000)]
    pub size: usize,
    /// Sampling effort of the simulated sample.
    #[arg(long, default_value_t = 1.0)]
    pub time: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where to write the sampled histogram.
    #[arg(long)]
    pub histogram: PathBuf,
    /// Where to write the exact curves on `r = 1..r_max`, `t = 1..t_max`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub r_max: usize,
    #[arg(long, default_value_t = 100)]
    pub t_max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Sampled histogram; with `--truth`, scores a single sample.
    #[arg(long, requires = "truth")]
    pub histogram: Option<PathBuf>,
    /// Exact curves as written by `simulate`.
    #[arg(long, requires = "histogram")]
    pub truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "rfa,ztp,ztnb,ls,bbc,cs")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
    /// Models for the replicated experiment run when no files are given.
    #[arg(long, value_delimiter = ',', value_parser = parse_model, default_value = "P,NB1,NB2,LN,Z,ZM")]
    pub models: Vec<ModelName>,
    #[arg(long, default_value_t = 100_000)]
    pub size: usize,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub r_max: usize,
    #[arg(long, default_value_t = 100)]
    pub t_max: usize,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_histogram(path: &Path) -> Result<FrequencyHistogram, CliError> {
    Ok(load_histogram(&read_file(path)?)?)
}

fn complex_json(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

fn report_json(report: &ConstructionReport) -> Value {
    json!({
        "accepted_m": report.accepted_m,
        "nominal_m": report.nominal_m,
        "m_cap": report.m_cap,
        "m1_fallback": report.m1_fallback,
        "saturated": report.saturated,
        "rejections": report
            .rejections
            .iter()
            .map(|(m, why)| json!({ "m": m, "reason": why.to_string() }))
            .collect::<Vec<_>>(),
        "defects": report
            .defects
            .iter()
            .map(|d| json!({
                "pole": complex_json(d.pole),
                "zero": complex_json(d.zero),
                "residue": complex_json(d.residue),
            }))
            .collect::<Vec<_>>(),
    })
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// JSON document `{"estimator": ..., "report": ...}`; the `estimator` field
/// deserializes back into [`crate::estimator::RsacEstimator`].
pub fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let hist = read_histogram(&args.input)?;
    let (est, report) = construct(&hist, args.m_max)?;
    let estimator = serde_json::to_value(&est).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(to_json(&json!({ "estimator": estimator, "report": report_json(&report) })))
}

struct Row {
    r: u32,
    t: f64,
    estimate: f64,
    interval: Option<BootstrapSummary>,
}

fn check_finite(v: f64, r: u32, t: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Numeric(format!("estimate at r = {r}, t = {t} is {v}")))
    }
}

/// One row per `(r, t)`, `r` outermost. With `--bootstrap` the rows carry
/// the bootstrap standard error and lognormal interval.
pub fn cmd_extrapolate(args: &ExtrapolateArgs) -> Result<String, CliError> {
    let hist = read_histogram(&args.input)?;
    let ts = args.t_grid()?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(UncertaintyError::InvalidLevel(args.level).into());
    }
    let (curve, selection, cv) = match args.method {
        MethodChoice::Fixed(m) => (FittedCurve::fit(m, &hist, args.m_max)?, "fixed", None),
        MethodChoice::Auto => {
            let bp = best_practice(&hist, args.m_max)?;
            (bp.curve, "auto", bp.cv.map(|c| c.cv))
        }
    };
    let method = curve.method();
    let source = RandomSource::new(args.seed);
    let mut rows = Vec::with_capacity(args.r.0.len() * ts.len());
    match args.bootstrap {
        None => {
            for &r in &args.r.0 {
                for &t in &ts {
                    let estimate = check_finite(curve.value(r as usize, t)?, r, t)?;
                    rows.push(Row { r, t, estimate, interval: None });
                }
            }
        }
        Some(b) if method == Method::Rfa => {
            let ensemble = bootstrap_ensemble(&hist, args.m_max, b, &source)?;
            for &r in &args.r.0 {
                for &t in &ts {
                    let s = ensemble.summary(r, t, args.level)?;
                    let estimate = check_finite(s.point, r, t)?;
                    rows.push(Row { r, t, estimate, interval: Some(s) });
                }
            }
        }
        Some(b) => {
            let curves = bootstrap_curves(method, &hist, args.m_max, b, &source)?;
            for &r in &args.r.0 {
                for &t in &ts {
                    let estimate = check_finite(curve.value(r as usize, t)?, r, t)?;
                    let values = curves
                        .iter()
                        .map(|c| c.value(r as usize, t))
                        .collect::<Result<Vec<_>, _>>()?;
                    let s = summarize(estimate, &values, args.level)?;
                    rows.push(Row { r, t, estimate, interval: Some(s) });
                }
            }
        }
    }

    let m = match &curve {
        FittedCurve::Rfa(e) => Some(e.m()),
        _ => None,
    };
    Ok(match args.format {
        Format::Json => to_json(&json!({
            "method": method.name(),
            "selection": selection,
            "cv": cv,
            "m": m,
            "bootstrap": args.bootstrap,
            "level": args.bootstrap.map(|_| args.level),
            "rows": rows
                .iter()
                .map(|row| {
                    let mut v = json!({ "r": row.r, "t": row.t, "estimate": row.estimate });
                    if let Some(s) = &row.interval {
                        v["se"] = json!(s.se());
                        v["ci_low"] = json!(s.ci_low);
                        v["ci_high"] = json!(s.ci_high);
                    }
                    v
                })
                .collect::<Vec<_>>(),
        })),
        Format::Tsv => {
            let mut out = format!("# method={method} selection={selection}");
            if let Some(cv) = cv {
                write!(out, " cv={cv}").expect("writing to a String");
            }
            if let Some(m) = m {
                write!(out, " m={m}").expect("writing to a String");
            }
            if let Some(b) = args.bootstrap {
                write!(out, " bootstrap={b} level={}", args.level).expect("writing to a String");
            }
            out.push('\n');
            out.push_str("r\tt\testimate");
            if args.bootstrap.is_some() {
                out.push_str("\tse\tci_low\tci_high");
            }
            out.push('\n');
            for row in &rows {
                write!(out, "{}\t{}\t{}", row.r, row.t, row.estimate).expect("writing to a String");
                if let Some(s) = &row.interval {
                    write!(out, "\t{}\t{}\t{}", s.se(), s.ci_low, s.ci_high).expect("writing to a String");
                }
                out.push('\n');
            }
            out
        }
    })
}

/// Writes the histogram (and optionally the exact curves) and returns a
/// JSON summary holding the population CV and sample sizes.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    if !(args.time > 0.0 && args.time.is_finite()) {
        return Err(CliError::Input(format!("sampling effort must be positive, got {}", args.time)));
    }
    let source = RandomSource::new(args.seed);
    let rates = population_for(args.model, args.size, &source)?;
    let mut sub = source.substream(replicate_stream(args.model, 0));
    let hist = sample_poisson(&rates, args.time, sub.rng());
    write_file(&args.histogram, &format!("# multiplicity\tcount\n{hist}"))?;
    if let Some(path) = &args.truth {
        if args.r_max == 0 || args.t_max == 0 {
            return Err(CliError::Input("truth grid needs r_max, t_max >= 1".into()));
        }
        let ts: Vec<f64> = (1..=args.t_max).map(|t| t as f64).collect();
        let grid = truth_grid(&rates, args.r_max, &ts);
        let mut out = String::from("r\tt\ttruth\n");
        for (r, row) in grid.iter().enumerate() {
            for (t, v) in ts.iter().zip(row) {
                writeln!(out, "{}\t{}\t{}", r + 1, t, v).expect("writing to a String");
            }
        }
        write_file(path, &out)?;
    }
    Ok(to_json(&json!({
        "model": args.model.label(),
        "size": args.size,
        "seed": args.seed,
        "time": args.time,
        "cv": cv_empirical(rates.rates()),
        "species": hist.species(),
        "individuals": hist.individuals(),
    })))
}

/// Reads an `r t truth` table into `grid[r - 1][k]` over the sorted t values.
pub fn parse_truth(text: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>), CliError> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('r') {
            continue;
        }
        let bad = || CliError::Input(format!("truth line {}: expected 'r t value'", idx + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        let [r, t, v] = f[..] else { return Err(bad()) };
        let r: usize = r.parse().map_err(|_| bad())?;
        let t: f64 = t.parse().map_err(|_| bad())?;
        let v: f64 = v.parse().map_err(|_| bad())?;
        if r == 0 {
            return Err(bad());
        }
        entries.push((r, t, v));
    }
    let mut ts: Vec<f64> = entries.iter().map(|e| e.1).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let r_max = entries.iter().map(|e| e.0).max().unwrap_or(0);
    if r_max == 0 {
        return Err(CliError::Input("truth table is empty".into()));
    }
    let mut grid = vec![vec![f64::NAN; ts.len()]; r_max];
    for (r, t, v) in entries {
        let k = ts.binary_search_by(|x| x.total_cmp(&t)).expect("t collected above");
        grid[r - 1][k] = v;
    }
    if grid.iter().flatten().any(|v| v.is_nan()) {
        return Err(CliError::Input("truth table does not cover a full r x t grid".into()));
    }
    Ok((ts, grid))
}

/// Relative errors of each method against a truth table, or the replicated
/// experiment over simulated models when no files are given.
pub fn cmd_compare(args: &CompareArgs) -> Result<String, CliError> {
    let (Some(hist_path), Some(truth_path)) = (&args.histogram, &args.truth) else {
        let config = ExperimentConfig {
            population_size: args.size,
            replicates: args.replicates,
            seed: args.seed,
            r_max: args.r_max,
            t_max: args.t_max,
            models: args.models.clone(),
            methods: args.methods.clone(),
            m_max: args.m_max,
        };
        let report = run_experiment(&config)?;
        return Ok(match args.format {
            Format::Tsv => report.to_tsv(),
            Format::Json => to_json(&serde_json::to_value(&report).expect("report serializes")),
        });
    };
    let hist = read_histogram(hist_path)?;
    let text = String::from_utf8(read_file(truth_path)?)
        .map_err(|_| CliError::Input("truth file is not valid UTF-8".into()))?;
    let (ts, truth) = parse_truth(&text)?;
    let mut columns = Vec::with_capacity(args.methods.len());
    for &method in &args.methods {
        let scored = FittedCurve::fit(method, &hist, args.m_max)
            .and_then(|c| c.grid(truth.len(), &ts))
            .map_err(CliError::from)
            .and_then(|grid| relative_error(&grid, &truth).map_err(CliError::from));
        columns.push((method, scored));
    }
    Ok(match args.format {
        Format::Json => {
            let methods: serde_json::Map<String, Value> = columns
                .iter()
                .map(|(m, res)| {
                    let v = match res {
                        Ok(e) => json!({ "per_r": e.per_r, "mean": e.mean, "skipped": e.skipped }),
                        Err(err) => json!({ "error": err.to_string() }),
                    };
                    (m.name().to_string(), v)
                })
                .collect();
            to_json(&Value::Object(methods))
        }
        Format::Tsv => {
            let mut out = String::from("r");
            for (m, _) in &columns {
                write!(out, "\t{m}").expect("writing to a String");
            }
            out.push('\n');
            let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
            for r in 0..truth.len() {
                out.push_str(&(r + 1).to_string());
                for (_, res) in &columns {
                    let v = res.as_ref().ok().and_then(|e| e.per_r[r]);
                    write!(out, "\t{}", cell(v)).expect("writing to a String");
                }
                out.push('\n');
            }
            out.push_str("mean");
            for (_, res) in &columns {
                let v = res.as_ref().ok().map(|e| e.mean);
                write!(out, "\t{}", cell(v)).expect("writing to a String");
            }
            out.push('\n');
            out
        }
    })
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a).and_then(|s| emit(&s, a.output.as_deref())),
        Command::Extrapolate(a) => cmd_extrapolate(a).and_then(|s| emit(&s, a.output.as_deref())),
        Command::Simulate(a) => cmd_simulate(a).and_then(|s| emit(&s, None)),
        Command::Compare(a) => cmd_compare(a).and_then(|s| emit(&s, a.output.as_deref())),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rsac: {e}");
            e.exit_code()
        }
    }
}

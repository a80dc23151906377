//! Command-line front end. Covariate indices on the command line and in
//! output files are 1-based.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::BaselineError;
use crate::bench::{self, BenchError, BenchmarkConfig, ConditioningSpec, Method};
use crate::cox::FitControl;
use crate::data::{self, ColumnSchema, ConditioningSet, DataError, SurvivalDataset};
use crate::diag::{self, DiagError};
use crate::metrics::{self, MetricsError};
use crate::screening::{self, ScreenError, ScreenOptions, ScreeningResult, Statistic, StatisticSet};
use crate::simgen::{self, Example, SimConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Io,
    Validation,
    Fit,
    Config,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Validation => "validation",
            Category::Fit => "fit",
            Category::Config => "config",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Validation => 4,
            Category::Fit => 5,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    fn new(category: Category, message: impl std::fmt::Display) -> Self {
        Self {
            category,
            message: message.to_string(),
        }
    }

    fn config(message: impl std::fmt::Display) -> Self {
        Self::new(Category::Config, message)
    }

    /// `coxscreen: <category>: <message>` on one line.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("coxscreen: {}: {}", self.category.as_str(), flat.join(" "))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(Category::Io, e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(Category::Io, e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let category = if e.is_io_error() { Category::Io } else { Category::Validation };
        Self::new(category, e)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) => Self::new(Category::Io, e),
            DataError::Csv(inner) => inner.into(),
            other => Self::new(Category::Validation, other),
        }
    }
}

impl From<ScreenError> for CliError {
    fn from(e: ScreenError) -> Self {
        match e {
            ScreenError::Data(d) => d.into(),
            ScreenError::NullFit(_) | ScreenError::NullNotConverged(_) | ScreenError::NoUsableFit | ScreenError::Fit(_) => {
                Self::new(Category::Fit, e)
            }
            ScreenError::TooFewEvents { .. } | ScreenError::NoCandidates => Self::new(Category::Validation, e),
            ScreenError::StatisticNotComputed(_) | ScreenError::InvalidThreshold(_) | ScreenError::TopKOutOfRange { .. } => {
                Self::config(e)
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Data(d) => d.into(),
            other => Self::config(other),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io(io) => io.into(),
            MetricsError::Csv(c) => c.into(),
            other => Self::new(Category::Validation, other),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Sim(s) => s.into(),
            BenchError::Metrics(m) => m.into(),
            BenchError::Data(d) => d.into(),
            other => Self::config(other),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Data(d) => d.into(),
            BaselineError::Screen(s) => s.into(),
            BaselineError::NonPositiveTime { .. } => Self::new(Category::Validation, e),
            BaselineError::UnknownMethod(_) => Self::config(e),
        }
    }
}

impl From<DiagError> for CliError {
    fn from(e: DiagError) -> Self {
        match e {
            DiagError::Data(d) => d.into(),
            DiagError::Singular => Self::new(Category::Fit, e),
            other => Self::new(Category::Validation, other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "coxscreen", version, about = "Conditional variable screening for the Cox proportional hazards model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen the covariates of a survival CSV file.
    #[command(args_override_self = true)]
    Screen(ScreenArgs),
    /// Write simulated replicates as CSV files.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Compare screening methods on simulated replicates.
    #[command(args_override_self = true)]
    Benchmark(BenchmarkArgs),
    /// Find the censoring bound that hits a target censoring rate.
    #[command(args_override_self = true)]
    Calibrate(CalibrateArgs),
    /// Report the partial covariance of each covariate with the event indicator.
    #[command(args_override_self = true)]
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// key=value file of flag defaults; flags given on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "status")]
    pub status_col: String,
    /// Center and scale covariates before screening.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Built-in design.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    pub example: Option<u32>,
    /// Custom design as a key=value file.
    #[arg(long, value_name = "FILE", conflicts_with = "example")]
    pub sim_config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Target censoring proportion.
    #[arg(long)]
    pub censoring: Option<f64>,
    /// Use this censoring bound instead of calibrating.
    #[arg(long)]
    pub censor_upper: Option<f64>,
    /// Batches of n draws used by the calibration.
    #[arg(long, default_value_t = simgen::CALIBRATION_REPLICATES)]
    pub calibration_replicates: usize,
    #[arg(long, env = "COXSCREEN_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma list of covariates (1-based indices or names), "auto" or "none".
    #[arg(long, default_value = "none")]
    pub conditioning: String,
    /// Statistics to compute: any of mple, wald, plik.
    #[arg(long, default_value = "mple,wald,plik")]
    pub stats: String,
    /// Keep covariates whose statistic is at least this value.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Keep the k top-ranked covariates (default floor(n / ln n)).
    #[arg(long, conflicts_with = "gamma")]
    pub top_k: Option<usize>,
    /// Also write signal_strength.csv.
    #[arg(long)]
    pub signal_strength: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// Comma list from cs-mple, cs-wald, cs-plik, psis-wald, psis-plik, cors, cris.
    #[arg(long, default_value = "cs-mple,cs-wald,cs-plik,psis-wald,psis-plik,cors,cris")]
    pub methods: String,
    /// Conditioning set for the CS methods: covariates, "auto" or "none".
    #[arg(long, default_value = "1")]
    pub conditioning: String,
    /// Correlate with log time in CORS.
    #[arg(long)]
    pub cors_log_time: bool,
    /// Selection budget for the true positive rate (default n).
    #[arg(long)]
    pub tpr_budget: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma list of covariates (1-based indices or names) or "none".
    #[arg(long, default_value = "none")]
    pub conditioning: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "coxscreen: {}: {}", record.level().as_str().to_lowercase(), record.args()))
        .try_init();
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let outcome = expand_config(argv).and_then(|argv| match Cli::try_parse_from(argv) {
        Ok(cli) => execute(cli),
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            Ok(())
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            Err(CliError::config(first.trim_start_matches("error: ")))
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.category.exit_code()
        }
    }
}

/// Splices the flags from a `--config` file in front of the command-line
/// flags, so explicit flags override file values.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    for (k, a) in argv.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_owned());
        } else if a == "--config" {
            path = argv.get(k + 1).cloned();
        }
    }
    let (Some(path), true) = (path, argv.len() >= 2) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::new(Category::Io, format!("{path}: {e}")))?;
    let mut flags = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("{path} line {}: expected key=value", k + 1)))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(CliError::config(format!("{path} line {}: nested config files are not supported", k + 1)));
        }
        match value.trim() {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => {
                flags.push(format!("--{key}"));
                flags.push(v.to_owned());
            }
        }
    }
    let mut out = argv[..2].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let workers = match &cli.command {
        Command::Screen(a) => a.common.workers,
        Command::Simulate(a) => a.common.workers,
        Command::Benchmark(a) => a.common.workers,
        Command::Calibrate(a) => a.common.workers,
        Command::Diagnose(a) => a.common.workers,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w as usize);
    }
    let pool = builder.build().map_err(CliError::config)?;
    pool.install(|| match cli.command {
        Command::Screen(a) => cmd_screen(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
    })
}

fn load_input(args: &InputArgs) -> Result<SurvivalDataset, CliError> {
    let schema = ColumnSchema {
        time_col: args.time_col.clone(),
        status_col: args.status_col.clone(),
        covariates: None,
    };
    let data = data::read_csv(&args.input, &schema).map_err(|e| match e {
        DataError::Io(io) => CliError::new(Category::Io, format!("{}: {io}", args.input.display())),
        other => other.into(),
    })?;
    let report = data.validate()?;
    log::info!(
        "read {} observations, {} covariates, {} events, {} censored",
        report.n,
        report.p,
        report.events,
        report.censored
    );
    for &j in &report.constant_columns {
        log::warn!("covariate {} ({}) is constant", j + 1, data.name(j));
    }
    if args.standardize {
        let (scaled, _) = data.standardize()?;
        return Ok(scaled);
    }
    Ok(data)
}

enum Conditioning {
    Fixed(Vec<usize>),
    Auto,
}

/// Resolves "none", "auto" or a comma list of 1-based indices or names.
fn parse_conditioning(spec: &str, names: &[String]) -> Result<Conditioning, CliError> {
    let spec = spec.trim();
    match spec.to_ascii_lowercase().as_str() {
        "none" | "" => return Ok(Conditioning::Fixed(Vec::new())),
        "auto" => return Ok(Conditioning::Auto),
        _ => {}
    }
    let mut out = Vec::new();
    for token in spec.split(',').map(str::trim) {
        let index = match token.parse::<usize>() {
            Ok(0) => return Err(CliError::config("conditioning indices are 1-based")),
            Ok(k) if k <= names.len() => k - 1,
            Ok(k) => return Err(CliError::config(format!("conditioning index {k} exceeds p = {}", names.len()))),
            Err(_) => names
                .iter()
                .position(|n| n == token)
                .ok_or_else(|| CliError::config(format!("unknown covariate '{token}' in conditioning")))?,
        };
        if out.contains(&index) {
            return Err(CliError::config(format!("covariate '{token}' listed twice in conditioning")));
        }
        out.push(index);
    }
    Ok(Conditioning::Fixed(out))
}

fn parse_stats(spec: &str) -> Result<Vec<Statistic>, CliError> {
    let mut stats: Vec<Statistic> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Statistic>().map_err(CliError::config))
        .collect::<Result<_, _>>()?;
    stats.sort();
    stats.dedup();
    if stats.is_empty() {
        return Err(CliError::config("no statistics requested"));
    }
    Ok(stats)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::new(Category::Io, format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::new(Category::Io, format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

#[derive(Serialize)]
struct CovariateRef {
    index: usize,
    name: String,
}

#[derive(Serialize)]
struct RecordRow {
    index: usize,
    name: String,
    beta_hat: Option<f64>,
    sigma_hat: Option<f64>,
    wald: Option<f64>,
    plik: Option<f64>,
    fit_status: &'static str,
    iterations: usize,
    rank_mple: Option<usize>,
    rank_wald: Option<usize>,
    rank_plik: Option<usize>,
}

#[derive(Serialize)]
struct NullFitReport {
    loglik: f64,
    coefficients: Vec<f64>,
    iterations: usize,
}

#[derive(Serialize)]
struct SelectionReport {
    statistic: Statistic,
    rule: String,
    selected: Vec<CovariateRef>,
}

#[derive(Serialize)]
struct ScreenReport {
    conditioning: Vec<CovariateRef>,
    statistics: Vec<Statistic>,
    null_fit: NullFitReport,
    failures: usize,
    records: Vec<RecordRow>,
    selections: Vec<SelectionReport>,
}

fn covariate_refs(indices: &[usize], data: &SurvivalDataset) -> Vec<CovariateRef> {
    indices
        .iter()
        .map(|&j| CovariateRef {
            index: j + 1,
            name: data.name(j).to_owned(),
        })
        .collect()
}

fn record_rows(result: &ScreeningResult, data: &SurvivalDataset) -> Vec<RecordRow> {
    let mut ranks = vec![[None; 3]; data.p()];
    for (k, stat) in Statistic::ALL.into_iter().enumerate() {
        if let Some(order) = result.rankings.get(stat) {
            for (pos, &j) in order.iter().enumerate() {
                ranks[j][k] = Some(pos + 1);
            }
        }
    }
    result
        .records
        .iter()
        .map(|r| RecordRow {
            index: r.index + 1,
            name: data.name(r.index).to_owned(),
            beta_hat: r.beta_hat,
            sigma_hat: r.sigma_hat,
            wald: r.wald,
            plik: r.plik,
            fit_status: r.fit_status.as_str(),
            iterations: r.iterations,
            rank_mple: ranks[r.index][0],
            rank_wald: ranks[r.index][1],
            rank_plik: ranks[r.index][2],
        })
        .collect()
}

fn write_record_csv<W: Write>(writer: W, rows: &[RecordRow]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "index", "name", "beta_hat", "sigma_hat", "wald", "plik", "fit_status", "iterations", "rank_mple", "rank_wald",
        "rank_plik",
    ])?;
    let rank = |r: Option<usize>| r.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.index.to_string(),
            r.name.clone(),
            fmt_opt(r.beta_hat),
            fmt_opt(r.sigma_hat),
            fmt_opt(r.wald),
            fmt_opt(r.plik),
            r.fit_status.to_owned(),
            r.iterations.to_string(),
            rank(r.rank_mple),
            rank(r.rank_wald),
            rank(r.rank_plik),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn cmd_screen(args: &ScreenArgs) -> Result<(), CliError> {
    let data = load_input(&args.input)?;
    let stats = parse_stats(&args.stats)?;
    let control = FitControl::default();
    let conditioning = match parse_conditioning(&args.conditioning, data.covariate_names())? {
        Conditioning::Fixed(c) => ConditioningSet::for_dataset(c, &data)?,
        Conditioning::Auto => {
            let c = screening::default_conditioning(&data, &control)?;
            let j = c.indices()[0];
            log::info!("auto conditioning chose covariate {} ({})", j + 1, data.name(j));
            c
        }
    };
    let options = ScreenOptions {
        control,
        statistics: StatisticSet::from_list(&stats),
    };
    let result = screening::screen(&data, &conditioning, &options)?;
    log::info!(
        "conditioning-only fit: loglik {:.6}, {} iterations; {} candidate fits failed",
        result.null_fit.loglik,
        result.null_fit.iterations,
        result.failure_count()
    );

    let candidates = result.records.len();
    let (rule, top_k) = match (args.gamma, args.top_k) {
        (Some(g), _) => (format!("gamma={g}"), None),
        (None, Some(k)) => (format!("top_k={k}"), Some(k)),
        (None, None) => {
            let k = screening::default_top_k(data.n()).min(candidates);
            (format!("top_k={k}"), Some(k))
        }
    };
    let mut selections = Vec::new();
    for &stat in &stats {
        let selected = match (args.gamma, top_k) {
            (Some(g), _) => screening::select_by_threshold(&result, stat, g)?,
            (None, Some(k)) => screening::select_top_k(&result, stat, k)?,
            (None, None) => unreachable!("one rule is always chosen"),
        };
        selections.push(SelectionReport {
            statistic: stat,
            rule: rule.clone(),
            selected: covariate_refs(&selected, &data),
        });
    }

    let rows = record_rows(&result, &data);
    let out = &args.common.out;
    match args.common.format {
        Format::Csv => {
            write_record_csv(create(out, "screen.csv")?, &rows)?;
            let mut wtr = csv::Writer::from_writer(create(out, "selected.csv")?);
            wtr.write_record(["statistic", "rule", "order", "index", "name"])?;
            for s in &selections {
                for (k, c) in s.selected.iter().enumerate() {
                    wtr.write_record([
                        s.statistic.as_str().to_owned(),
                        s.rule.clone(),
                        (k + 1).to_string(),
                        c.index.to_string(),
                        c.name.clone(),
                    ])?;
                }
            }
            wtr.flush()?;
        }
        Format::Json => {
            let report = ScreenReport {
                conditioning: covariate_refs(conditioning.indices(), &data),
                statistics: stats.clone(),
                null_fit: NullFitReport {
                    loglik: result.null_fit.loglik,
                    coefficients: result.null_fit.coefficients.clone(),
                    iterations: result.null_fit.iterations,
                },
                failures: result.failure_count(),
                records: rows,
                selections,
            };
            let mut w = create(out, "screen.json")?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    if args.signal_strength {
        write_signal_strength(&data, &conditioning, out, args.common.format)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SignalRow {
    index: usize,
    name: String,
    signal_strength: f64,
}

fn write_signal_strength(data: &SurvivalDataset, conditioning: &ConditioningSet, out: &Path, format: Format) -> Result<(), CliError> {
    let values = diag::signal_strengths(data, conditioning)?;
    if values.is_empty() {
        log::warn!("every covariate is in the conditioning set; nothing to diagnose");
    }
    let rows: Vec<SignalRow> = values
        .into_iter()
        .map(|(j, v)| SignalRow {
            index: j + 1,
            name: data.name(j).to_owned(),
            signal_strength: v,
        })
        .collect();
    match format {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(create(out, "signal_strength.csv")?);
            wtr.write_record(["index", "name", "signal_strength"])?;
            for r in &rows {
                wtr.write_record([r.index.to_string(), r.name.clone(), format!("{:?}", r.signal_strength)])?;
            }
            wtr.flush()?;
        }
        Format::Json => {
            let mut w = create(out, "signal_strength.json")?;
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    let data = load_input(&args.input)?;
    let conditioning = match parse_conditioning(&args.conditioning, data.covariate_names())? {
        Conditioning::Fixed(c) => ConditioningSet::for_dataset(c, &data)?,
        Conditioning::Auto => return Err(CliError::config("conditioning=auto is only available for screen and benchmark")),
    };
    write_signal_strength(&data, &conditioning, &args.common.out, args.common.format)
}

/// The design described by the flags, without calibrating censoring.
fn design(args: &SimArgs) -> Result<(SimConfig, String), CliError> {
    let (mut cfg, id) = match (args.example, &args.sim_config) {
        (Some(e), None) => {
            let example = Example::from_id(e).ok_or_else(|| CliError::config(format!("unknown example {e}")))?;
            let n = args.n.unwrap_or(100);
            let p = args.p.unwrap_or(1000);
            let min_p = if example == Example::One { 6 } else { 2 };
            if p < min_p {
                return Err(CliError::config(format!("example {e} needs p >= {min_p}")));
            }
            (SimConfig::example(example, n, p, 1), format!("example{e}"))
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::new(Category::Io, format!("{}: {e}", path.display())))?;
            let mut cfg = SimConfig::from_kv(&text)?;
            cfg.n = args.n.unwrap_or(cfg.n);
            cfg.p = args.p.unwrap_or(cfg.p);
            (cfg, "custom".to_owned())
        }
        _ => return Err(CliError::config("one of --example or --sim-config is required")),
    };
    if args.sim_config.is_none() || args.seed.is_some() {
        cfg.seed = args.seed.unwrap_or(1);
    }
    if let Some(target) = args.censoring {
        cfg.censor_target = target;
        if args.censor_upper.is_none() {
            cfg.censor_upper = None;
        }
    }
    if let Some(c) = args.censor_upper {
        cfg.censor_upper = Some(c);
    }
    cfg.validate()?;
    let id = format!("{id}_n{}_p{}_cr{}", cfg.n, cfg.p, cfg.censor_target);
    Ok((cfg, id))
}

/// [`design`], calibrating censoring unless a bound is already known.
fn build_sim(args: &SimArgs) -> Result<(SimConfig, String), CliError> {
    let (mut cfg, id) = design(args)?;
    if cfg.censor_upper.is_none() {
        let cal = simgen::calibrate_censoring(&cfg, cfg.censor_target, args.calibration_replicates)?;
        log::info!(
            "censoring bound {:.6} gives {:.4} censored (target {})",
            cal.censor_upper,
            cal.achieved,
            cfg.censor_target
        );
        cfg.censor_upper = Some(cal.censor_upper);
    }
    Ok((cfg, id))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    if args.common.format == Format::Json {
        return Err(CliError::config("simulate writes CSV only"));
    }
    let (cfg, _) = build_sim(&args.sim)?;
    let out = &args.common.out;
    let mut w = create(out, "sim_config.txt")?;
    w.write_all(cfg.to_kv().as_bytes())?;
    w.flush()?;
    for id in 1..=args.replicates as u64 {
        let rep = simgen::gen_replicate(&cfg, id)?;
        if rep.clipped > 0 {
            log::warn!("replicate {id}: {} linear predictors clipped", rep.clipped);
        }
        data::write_csv_to_writer(create(out, &format!("replicate_{id:04}.csv"))?, &rep.dataset)?;
        log::info!("replicate {id}: {:.3} censored", rep.realized_censoring);
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport {
    censor_upper: f64,
    achieved: f64,
    target: f64,
    draws: usize,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let (cfg, _) = design(&args.sim)?;
    let target = cfg.censor_target;
    let cal = simgen::calibrate_censoring(&cfg, target, args.sim.calibration_replicates)?;
    let report = CalibrationReport {
        censor_upper: cal.censor_upper,
        achieved: cal.achieved,
        target,
        draws: cal.draws,
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match args.common.format {
        Format::Csv => {
            writeln!(out, "censor_upper={:?}", report.censor_upper)?;
            writeln!(out, "achieved={:?}", report.achieved)?;
            writeln!(out, "target={:?}", report.target)?;
            writeln!(out, "draws={}", report.draws)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchmarkReport<'a> {
    sim_config: &'a SimConfig,
    output: &'a bench::BenchmarkOutput,
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let (cfg, config_id) = build_sim(&args.sim)?;
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Method>().map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let names: Vec<String> = (1..=cfg.p).map(|j| format!("z{j}")).collect();
    let conditioning = match parse_conditioning(&args.conditioning, &names)? {
        Conditioning::Fixed(c) => ConditioningSpec::Fixed(c),
        Conditioning::Auto => ConditioningSpec::Auto,
    };
    let mut bench_cfg = BenchmarkConfig::new(cfg.clone(), config_id, args.replicates, methods);
    bench_cfg.conditioning = conditioning;
    bench_cfg.cors_log_time = args.cors_log_time;
    bench_cfg.tpr_budget = args.tpr_budget;
    let output = bench::run_benchmark(&bench_cfg)?;
    for f in &output.failures {
        log::warn!("{} failed on replicate {}: {}", f.method, f.replicate_id, f.error);
    }
    for s in &output.summaries {
        log::info!(
            "{:<9} median MMS {} (IQR {}), median TPR {:.2} (IQR {:.2}), sure {:.2}, {} replicates",
            s.method,
            s.median_mms,
            s.iqr_mms,
            s.median_tpr,
            s.iqr_tpr,
            s.sure_rate,
            s.replicates
        );
    }
    let out = &args.common.out;
    match args.common.format {
        Format::Csv => {
            metrics::write_summary_csv(create(out, "summary.csv")?, &output.summaries)?;
            metrics::write_scores_csv(create(out, "scores.csv")?, &output.config_id, &output.scores)?;
            let mut wtr = csv::Writer::from_writer(create(out, "failures.csv")?);
            wtr.write_record(["method", "replicate", "error"])?;
            for f in &output.failures {
                wtr.write_record([f.method.clone(), f.replicate_id.to_string(), f.error.clone()])?;
            }
            wtr.flush()?;
        }
        Format::Json => {
            let mut w = create(out, "benchmark.json")?;
            serde_json::to_writer_pretty(
                &mut w,
                &BenchmarkReport {
                    sim_config: &cfg,
                    output: &output,
                },
            )?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (1..=p).map(|j| format!("z{j}")).collect()
    }

    #[test]
    fn conditioning_specs() {
        assert!(matches!(parse_conditioning("none", &names(3)).unwrap(), Conditioning::Fixed(c) if c.is_empty()));
        assert!(matches!(parse_conditioning("AUTO", &names(3)).unwrap(), Conditioning::Auto));
        assert!(matches!(parse_conditioning("1, z3", &names(3)).unwrap(), Conditioning::Fixed(c) if c == vec![0, 2]));
        assert!(parse_conditioning("0", &names(3)).is_err());
        assert!(parse_conditioning("4", &names(3)).is_err());
        assert!(parse_conditioning("z9", &names(3)).is_err());
        assert!(parse_conditioning("1,z1", &names(3)).is_err());
    }

    #[test]
    fn stats_parsing() {
        assert_eq!(parse_stats("plik, mple,plik").unwrap(), vec![Statistic::Mple, Statistic::Plik]);
        assert!(parse_stats("").is_err());
        assert!(parse_stats("aic").is_err());
    }

    #[test]
    fn config_flags_come_before_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# defaults\nn = 50\nstandardize=true\ncors_log_time=false\n").unwrap();
        let argv: Vec<String> = ["coxscreen", "benchmark", "--config", path.to_str().unwrap(), "--n", "70"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let expanded = expand_config(argv).unwrap();
        assert_eq!(&expanded[2..5], &["--n", "50", "--standardize"]);
        assert_eq!(expanded.last().unwrap(), "70");
    }

    #[test]
    fn error_lines_are_single_line() {
        let e = CliError::new(Category::Fit, "first\nsecond");
        assert_eq!(e.line(), "coxscreen: fit: first second");
        assert_eq!(Category::Config.exit_code(), 2);
    }
}

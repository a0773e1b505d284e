//! Command-line surface of `condtail`.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 on usage errors.
//! Failures print `{"error": {"category": ..., "message": ...}}` on stderr.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use condtail::aggregate::{estimate_many, split_seed, KChoice, PipelineConfig};
use condtail::array::{extract_local_sample, sort_descending, split_into_grid, Dataset};
use condtail::baselines::{binned_descriptives, gardes_estimate, DEFAULT_MIN_BIN_COUNT};
use condtail::inference::TestForm;
use condtail::io::{
    derive_growth_variable, load_csv, parse_axis, parse_x0_points, read_panel, write_mc_csv,
    EstimateReport, EstimateRow, GrowthMode, InputSpec, LoadOptions, PanelColumns, PanelSpec,
};
use condtail::kselect::{default_k_range, select_k, KDiagnostic};
use condtail::simulation::{run_monte_carlo_gardes, run_monte_carlo_multi, Design};
use condtail::Error;

pub const THREADS_ENV: &str = "CONDTAIL_THREADS";
pub const TOOL: &str = "condtail";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "condtail", version, about = "Conditional Pareto exponent estimation")]
struct Cli {
    /// Worker threads (overrides CONDTAIL_THREADS; 0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split-aggregated conditional tail exponent at one or more points.
    Estimate(EstimateArgs),
    /// Monte Carlo table for a simulation design.
    Simulate(SimulateArgs),
    /// Diagnostic choice of K on one sample.
    SelectK(SelectKArgs),
    /// Bandwidth-based comparator, on data or in Monte Carlo.
    BaselineGardes(GardesArgs),
    /// Quantile-based dispersion, skewness and kurtosis by bins.
    Descriptives(DescriptivesArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    y: String,
    /// Covariate columns; in panel mode a subset of `rank` and the covariates.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    /// Points: `;` between points, `,` between coordinates, `a:b:step` ranges.
    #[arg(long)]
    x0: String,
    /// `auto` or a fixed number of tail observations.
    #[arg(long, default_value = "auto")]
    k: String,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `auto` or a row count.
    #[arg(long, default_value = "auto")]
    rows: String,
    #[arg(long, default_value = "auto")]
    cols: String,
    /// Covariates matched exactly before splitting.
    #[arg(long, value_delimiter = ',')]
    discrete: Vec<String>,
    /// Treat discrete covariates as ordinary coordinates (use with --scale).
    #[arg(long)]
    no_exact_match: bool,
    /// Per-coordinate distance weights.
    #[arg(long, value_delimiter = ',')]
    scale: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    moments: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = 0.95)]
    bound_level: f64,
    /// Decide moment tests with the unscaled statistic.
    #[arg(long)]
    printed_form: bool,
    #[arg(long)]
    out: Option<PathBuf>,

    /// Read a long panel and estimate on log-earnings changes.
    #[arg(long)]
    panel: bool,
    #[arg(long, default_value = "id")]
    id: String,
    #[arg(long, default_value = "period")]
    period: String,
    #[arg(long, default_value = "earnings")]
    earnings: String,
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long, default_value_t = 1)]
    base_period: i64,
    #[arg(long, default_value_t = 2)]
    next_period: i64,
    /// absolute, signed-left or signed-right
    #[arg(long, default_value = "absolute")]
    mode: String,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// 1: alpha(x) = 1 + 10x; 2: alpha(x) = 10(x^2 - x + 1)
    #[arg(long)]
    design: u32,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long)]
    x0: String,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectKArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    y: String,
    /// With --x0, K is chosen on the nearest-neighbor sample of one split.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GardesArgs {
    /// Data mode: CSV with `--y` and a scalar covariate `--x`.
    #[arg(long, conflicts_with = "design")]
    input: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    y: String,
    #[arg(long, default_value = "x")]
    x: String,
    /// Monte Carlo mode.
    #[arg(long)]
    design: Option<u32>,
    /// Sample size per replication in Monte Carlo mode.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    x0: String,
    #[arg(long, value_delimiter = ',', required = true)]
    bandwidth: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DescriptivesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    y: String,
    /// Conditioning variable whose quantiles define the bins.
    #[arg(long)]
    by: String,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_BIN_COUNT)]
    min_count: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(m) => CliError::Usage(m),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }

    fn category(&self) -> &str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.category(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn report_error(err: &CliError) {
    let body = serde_json::json!({
        "error": { "category": err.category(), "message": err.message() }
    });
    eprintln!("{body}");
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let _ = e.print();
                    report_error(&CliError::Usage(e.kind().to_string()));
                    2
                }
            };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();

    let result = thread_count(cli.threads).and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
        info!("threads: {}", pool.current_num_threads());
        pool.install(|| dispatch(cli.command))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e);
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        _ => Ok(0),
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::SelectK(a) => select_k_cmd(a),
        Command::BaselineGardes(a) => gardes(a),
        Command::Descriptives(a) => descriptives(a),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let written = match out {
        Some(p) => File::create(p).and_then(|mut f| f.write_all(bytes)),
        None => std::io::stdout().lock().write_all(bytes),
    };
    written.map_err(|e| CliError::Core(Error::Io(e.to_string())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Core(Error::Io(e.to_string())))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn parse_dim(s: &str, what: &str) -> CliResult<Option<usize>> {
    if s == "auto" {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(CliError::Usage(format!("--{what} must be 'auto' or a positive integer"))),
    }
}

fn parse_k(s: &str, k_min: Option<usize>, k_max: Option<usize>) -> CliResult<KChoice> {
    if s == "auto" {
        return Ok(KChoice::Auto { k_min, k_max });
    }
    if k_min.is_some() || k_max.is_some() {
        return Err(CliError::Usage("--k-min/--k-max only apply with --k auto".into()));
    }
    s.parse::<usize>()
        .ok()
        .filter(|&k| k > 0)
        .map(KChoice::Fixed)
        .ok_or_else(|| CliError::Usage(format!("--k must be 'auto' or a positive integer, got '{s}'")))
}

fn scalar_points(spec: &str) -> CliResult<Vec<f64>> {
    Ok(parse_x0_points(spec, 1)?.into_iter().map(|p| p[0]).collect())
}

fn load_estimation_data(a: &EstimateArgs) -> CliResult<(Dataset, InputSpec)> {
    if a.panel {
        let columns = PanelColumns {
            id: a.id.clone(),
            period: a.period.clone(),
            earnings: a.earnings.clone(),
            covariates: a.covariates.clone(),
        };
        let mode: GrowthMode = a.mode.parse()?;
        let file = File::open(&a.input)
            .map_err(|e| Error::Io(format!("{}: {e}", a.input.display())))?;
        let panel = read_panel(file, &columns)?;
        let growth =
            derive_growth_variable(&panel.value, &a.covariates, a.base_period, a.next_period, mode)?;
        let mut data = growth.value;
        if !a.x.is_empty() {
            let idx = a
                .x
                .iter()
                .map(|c| {
                    data.column_index(c)
                        .ok_or_else(|| Error::Schema(format!("column '{c}' not in rank or covariates")))
                })
                .collect::<condtail::Result<Vec<_>>>()?;
            data = data.select_columns(&idx)?;
        }
        for d in &a.discrete {
            if data.column_index(d).is_none() {
                return Err(Error::Schema(format!("discrete column '{d}' is not a covariate")).into());
            }
        }
        let flags = data.names().iter().map(|n| a.discrete.contains(n)).collect();
        let data = data.with_discrete(flags)?;
        let spec = InputSpec {
            path: a.input.display().to_string(),
            y: "growth".into(),
            x: data.names().to_vec(),
            discrete: a.discrete.clone(),
            panel: Some(PanelSpec {
                id: a.id.clone(),
                period: a.period.clone(),
                earnings: a.earnings.clone(),
                covariates: a.covariates.clone(),
                base_period: a.base_period,
                next_period: a.next_period,
                mode,
            }),
            dropped_rows: panel.dropped + growth.dropped,
            n_records: data.len(),
        };
        Ok((data, spec))
    } else {
        if a.x.is_empty() {
            return Err(CliError::Usage("--x is required".into()));
        }
        let options = LoadOptions {
            discrete: a.discrete.clone(),
        };
        let loaded = load_csv(&a.input, &a.y, &a.x, &options)?;
        let spec = InputSpec {
            path: a.input.display().to_string(),
            y: a.y.clone(),
            x: a.x.clone(),
            discrete: a.discrete.clone(),
            panel: None,
            dropped_rows: loaded.dropped,
            n_records: loaded.value.len(),
        };
        Ok((loaded.value, spec))
    }
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    let config = PipelineConfig {
        rows: parse_dim(&a.rows, "rows")?,
        cols: parse_dim(&a.cols, "cols")?,
        k: parse_k(&a.k, a.k_min, a.k_max)?,
        splits: a.splits,
        seed: a.seed,
        scale: a.scale.clone(),
        exact_match_discrete: !a.no_exact_match,
        moment_orders: a.moments.clone(),
        level: a.level,
        bound_level: a.bound_level,
        test_form: if a.printed_form {
            TestForm::AsPrinted
        } else {
            TestForm::Studentized
        },
    };
    config.validate()?;
    let (data, input) = load_estimation_data(&a)?;
    if input.dropped_rows > 0 {
        warn!("dropped {} unusable rows", input.dropped_rows);
    }
    let points = parse_x0_points(&a.x0, data.dim())?;
    info!(
        "estimate: seed={} points={} records={} config={}",
        config.seed,
        points.len(),
        data.len(),
        serde_json::to_string(&config).unwrap_or_default()
    );

    let results = estimate_many(&data, &points, &config)?;
    let rows: Vec<EstimateRow> = points
        .iter()
        .zip(&results)
        .map(|(p, r)| EstimateRow::from_result(p, config.splits, r))
        .collect();
    for row in &rows {
        if row.k_fallbacks > 0 {
            warn!(
                "x0={:?}: K selection fell back to k_max in {} of {} splits",
                row.x0, row.k_fallbacks, row.effective_splits
            );
        }
        if let Some(msg) = &row.error_message {
            warn!("x0={:?}: {msg}", row.x0);
        }
    }
    let report = EstimateReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        seed: config.seed,
        input,
        config,
        rows,
    };
    emit(a.out.as_deref(), &to_json(&report)?)?;
    match results.iter().find_map(|r| r.as_ref().err()) {
        Some(e) if results.iter().all(|r| r.is_err()) => Err(CliError::Core(e.clone())),
        _ => Ok(()),
    }
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let design = Design::from_id(a.design)?;
    let x0s = scalar_points(&a.x0)?;
    info!(
        "simulate: seed={} design={} rows={} cols={} k={:?} x0={:?} reps={}",
        a.seed, a.design, a.rows, a.cols, a.k, x0s, a.reps
    );
    let table = run_monte_carlo_multi(design, a.rows, a.cols, &a.k, &x0s, a.reps, a.seed)?;
    let mut buf = Vec::new();
    write_mc_csv(&table, &mut buf)?;
    emit(a.out.as_deref(), &buf)
}

#[derive(Serialize)]
struct SelectKReport {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    x0: Option<Vec<f64>>,
    n_sample: usize,
    k_min: usize,
    k_max: usize,
    k_star: usize,
    fallback_used: bool,
    diagnostics: Vec<KDiagnostic>,
}

fn select_k_cmd(a: SelectKArgs) -> CliResult<()> {
    let (sample, x0) = match &a.x0 {
        None => {
            let loaded = load_csv_y_only(&a.input, &a.y)?;
            let mut v = loaded;
            sort_descending(&mut v);
            (v, None)
        }
        Some(spec) => {
            if a.x.is_empty() {
                return Err(CliError::Usage("--x0 needs --x".into()));
            }
            let data = load_csv(&a.input, &a.y, &a.x, &LoadOptions::default())?.value;
            let points = parse_x0_points(spec, data.dim())?;
            if points.len() != 1 {
                return Err(CliError::Usage("select-k takes a single conditioning point".into()));
            }
            let grid = split_into_grid(&data, None, None, split_seed(a.seed, 0))?;
            let local = extract_local_sample(&grid, &points[0], None)?;
            (local.values().to_vec(), Some(points[0].clone()))
        }
    };
    let (lo, hi) = default_k_range(sample.len());
    let (k_min, k_max) = (a.k_min.unwrap_or(lo), a.k_max.unwrap_or(hi));
    info!("select-k: seed={} n={} range=[{k_min}, {k_max}]", a.seed, sample.len());
    let sel = select_k(&sample, k_min, k_max)?;
    if sel.fallback_used {
        warn!("no candidate K satisfied the rule; using k_max = {k_max}");
    }
    let report = SelectKReport {
        tool: TOOL,
        version: VERSION,
        seed: a.seed,
        x0,
        n_sample: sample.len(),
        k_min,
        k_max,
        k_star: sel.k_star,
        fallback_used: sel.fallback_used,
        diagnostics: sel.diagnostics,
    };
    emit(a.out.as_deref(), &to_json(&report)?)
}

fn load_csv_y_only(path: &Path, y: &str) -> CliResult<Vec<f64>> {
    // The response column doubles as a dummy covariate.
    let loaded = load_csv(path, y, &[y.to_string()], &LoadOptions::default())?;
    if loaded.dropped > 0 {
        warn!("dropped {} unusable rows", loaded.dropped);
    }
    Ok(loaded.value.ys().to_vec())
}

#[derive(Serialize)]
struct GardesRow {
    x0: f64,
    bandwidth: f64,
    k: usize,
    status: &'static str,
    error_category: Option<String>,
    alpha_hat: Option<f64>,
    se_alpha: Option<f64>,
    n_selected: Option<usize>,
}

#[derive(Serialize)]
struct GardesReport {
    tool: &'static str,
    version: &'static str,
    input: String,
    n_records: usize,
    rows: Vec<GardesRow>,
}

fn gardes(a: GardesArgs) -> CliResult<()> {
    match (&a.input, a.design) {
        (Some(path), None) => {
            let loaded = load_csv(path, &a.y, std::slice::from_ref(&a.x), &LoadOptions::default())?;
            let data = loaded.value;
            let pairs: Vec<(f64, f64)> = (0..data.len()).map(|i| (data.y(i), data.x(i)[0])).collect();
            let x0s = scalar_points(&a.x0)?;
            info!("baseline-gardes: n={} x0={:?} b={:?} k={:?}", pairs.len(), x0s, a.bandwidth, a.k);
            let mut rows = Vec::new();
            for &x0 in &x0s {
                for &k in &a.k {
                    for &b in &a.bandwidth {
                        let r = gardes_estimate(&pairs, x0, b, k);
                        rows.push(GardesRow {
                            x0,
                            bandwidth: b,
                            k,
                            status: if r.is_ok() { "ok" } else { "failed" },
                            error_category: r.as_ref().err().map(|e| e.category().to_string()),
                            alpha_hat: r.as_ref().ok().map(|e| e.alpha_hat),
                            se_alpha: r.as_ref().ok().map(|e| e.se_alpha),
                            n_selected: r.as_ref().ok().map(|e| e.n_selected),
                        });
                    }
                }
            }
            let report = GardesReport {
                tool: TOOL,
                version: VERSION,
                input: path.display().to_string(),
                n_records: pairs.len(),
                rows,
            };
            emit(a.out.as_deref(), &to_json(&report)?)
        }
        (None, Some(id)) => {
            let design = Design::from_id(id)?;
            let n = a
                .n
                .ok_or_else(|| CliError::Usage("Monte Carlo mode needs --n".into()))?;
            let x0 = parse_axis(&a.x0)?;
            if x0.len() != 1 {
                return Err(CliError::Usage("Monte Carlo mode takes a single --x0".into()));
            }
            info!(
                "baseline-gardes: seed={} design={id} n={n} x0={} b={:?} k={:?} reps={}",
                a.seed, x0[0], a.bandwidth, a.k, a.reps
            );
            let table = run_monte_carlo_gardes(design, n, &a.k, x0[0], &a.bandwidth, a.reps, a.seed)?;
            let mut buf = Vec::new();
            write_mc_csv(&table, &mut buf)?;
            emit(a.out.as_deref(), &buf)
        }
        _ => Err(CliError::Usage("give either --input or --design".into())),
    }
}

fn descriptives(a: DescriptivesArgs) -> CliResult<()> {
    let loaded = load_csv(&a.input, &a.y, std::slice::from_ref(&a.by), &LoadOptions::default())?;
    if loaded.dropped > 0 {
        warn!("dropped {} unusable rows", loaded.dropped);
    }
    let data = loaded.value;
    let pairs: Vec<(f64, f64)> = (0..data.len()).map(|i| (data.y(i), data.x(i)[0])).collect();
    info!("descriptives: n={} bins={} min_count={}", pairs.len(), a.bins, a.min_count);
    let rows = binned_descriptives(&pairs, a.bins, a.min_count)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(Error::from)?;
    }
    let buf = w
        .into_inner()
        .map_err(|e| CliError::Core(Error::Io(e.to_string())))?;
    emit(a.out.as_deref(), &buf)
}

//! Command-line front end: `fit`, `plotdata`, `sample`, `simulate` and `report`.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 non-convergence (output is still
//! written). `--config PATH` names a JSON object whose keys override flags of the same
//! name, with `_` for `-` (`{"usd_eur_rate": 0.9, "tie_t1_m1": true}`).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{
    billionaire_effective_income, empirical_ccdf, load_billionaires, load_incomes_path, merge_datasets, Dataset,
    IncomeFormat, Rejection, DEFAULT_RETURN_RATE,
};
use crate::error::Error;
use crate::fit::{bootstrap_errors, fit, FitConfig, FitResult};
use crate::langevin::{run_to_stationarity, simulate_ensemble, write_snapshots_csv, SimConfig, StationarityRule};
use crate::model::{log_grid, normalize, DEFAULT_QUAD_TOL};
use crate::params::{FpCoefficients, Params};
use crate::report::{
    aggregate_params, crisis_indicator, reference_rows, render_table, round_thousand, CrisisIndicator, ReportRow,
    DEFAULT_CRISIS_THRESHOLD,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "income-eq", version, about = "Two-branch household income distribution: fit, sample, simulate, report")]
struct Cli {
    /// JSON object of flag overrides (keys use `_` for `-`)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the six parameters to an income CSV and bootstrap their errors
    Fit(FitArgs),
    /// Empirical and model CCDF as CSV for log-log plotting
    Plotdata(PlotArgs),
    /// Draw incomes from a parameter set
    Sample(SampleArgs),
    /// Langevin ensemble simulation of the generating dynamics
    Simulate(SimulateArgs),
    /// Parameter table, crisis flags and cross-row means
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct IncomeArgs {
    /// Income CSV with an `income` column and optional `weight` column
    #[arg(long, value_name = "PATH")]
    incomes: PathBuf,
    #[arg(long, default_value = "income")]
    income_column: String,
    #[arg(long, default_value = "weight")]
    weight_column: String,
    /// Ignore the weight column
    #[arg(long)]
    unweighted: bool,
}

impl IncomeArgs {
    fn format(&self) -> IncomeFormat {
        IncomeFormat {
            income_column: self.income_column.clone(),
            weight_column: (!self.unweighted).then(|| self.weight_column.clone()),
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: IncomeArgs,
    /// Rich-list CSV (`wealth_usd`, optional `name`) merged into the top of the sample
    #[arg(long, value_name = "PATH")]
    billionaires: Option<PathBuf>,
    /// EUR per USD, required with --billionaires
    #[arg(long, alias = "usd-eur-rate", value_name = "RATE")]
    usd_eur: Option<f64>,
    /// Annual return turning wealth into effective income
    #[arg(long, default_value_t = DEFAULT_RETURN_RATE)]
    return_rate: f64,
    /// Weight of each merged top income
    #[arg(long, default_value_t = 1.0)]
    top_weight: f64,
    /// Constrain T1 = m1
    #[arg(long)]
    tie_t1_m1: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap resamples (0 skips the error estimate)
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    #[arg(long, default_value_t = FitConfig::default().tail_trim)]
    tail_trim: usize,
    /// Objective evaluations allowed per simplex pass
    #[arg(long, default_value_t = FitConfig::default().max_evaluations)]
    max_evaluations: usize,
    #[arg(long, default_value_t = DEFAULT_CRISIS_THRESHOLD)]
    crisis_threshold: f64,
    /// Label for the dataset (default: file stem)
    #[arg(long)]
    label: Option<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParamSource {
    /// JSON file holding a parameter object or a `fit` result
    #[arg(long, value_name = "PATH", conflicts_with = "row")]
    params: Option<PathBuf>,
    /// Built-in reference row by label (2005-2010)
    #[arg(long)]
    row: Option<String>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[command(flatten)]
    source: ParamSource,
    #[command(flatten)]
    input: IncomeArgs,
    #[arg(long, default_value_t = 500)]
    model_points: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    source: ParamSource,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ParamSource,
    /// Diffusion scale `b` of the realizing coefficients
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 10_000)]
    agents: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Snapshot every this many steps (default: initial and final state only)
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ignore --steps and run until snapshots at t and 2t agree
    #[arg(long)]
    until_stationary: bool,
    #[arg(long, default_value_t = StationarityRule::default().ks_threshold)]
    ks_threshold: f64,
    #[arg(long, default_value_t = StationarityRule::default().first_check)]
    first_check: f64,
    #[arg(long, default_value_t = StationarityRule::default().max_time)]
    max_time: f64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// `fit` output files; the built-in reference rows when none are given
    #[arg(long, value_name = "PATH", action = ArgAction::Append)]
    fits: Vec<PathBuf>,
    /// Row labels left out of the means
    #[arg(long, value_name = "LABEL", action = ArgAction::Append)]
    exclude: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_CRISIS_THRESHOLD)]
    crisis_threshold: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// What `fit` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub dataset: DatasetSummary,
    #[serde(flatten)]
    pub fit: FitResult,
    pub crisis: CrisisIndicator,
    pub crisis_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub label: String,
    pub records: usize,
    pub total_weight: f64,
    pub top_incomes: usize,
    pub rejected_rows: usize,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn from_error(context: &str, e: Error) -> Self {
        let code = match e {
            Error::Quadrature { .. } | Error::UnreliableErrors { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_INPUT,
        };
        let message = if context.is_empty() {
            e.to_string()
        } else {
            format!("{context}: {e}")
        };
        Self { code, message }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn ctx(context: impl std::fmt::Display) -> impl FnOnce(Error) -> Failure {
    move |e| Failure::from_error(&context.to_string(), e)
}

fn command() -> clap::Command {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match config_args(&argv) {
        Ok(extra) => argv.extend(extra),
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    }
    let cli = match command()
        .try_get_matches_from(argv)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = write!(sink, "{text}");
            return if code == 0 { EXIT_OK } else { EXIT_INPUT };
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(a, stdout, stderr),
        Command::Plotdata(a) => cmd_plotdata(a, stdout, stderr),
        Command::Sample(a) => cmd_sample(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout, stderr),
        Command::Report(a) => cmd_report(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// Flags derived from the `--config` JSON, to be appended after the real arguments.
fn config_args(argv: &[OsString]) -> std::result::Result<Vec<OsString>, Failure> {
    let mut path = None;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            path = it.next().map(PathBuf::from);
        } else if let Some(rest) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(rest));
        }
    }
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(map) = value else {
        return Err(Failure::input(format!("{}: config must be a JSON object", path.display())));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        if key == "config" {
            return Err(Failure::input("config files cannot name another config"));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let values = match v {
            serde_json::Value::Array(items) => items,
            other => vec![other],
        };
        for v in values {
            match v {
                serde_json::Value::Bool(true) => out.push(flag.clone().into()),
                serde_json::Value::Bool(false) | serde_json::Value::Null => {}
                serde_json::Value::Number(n) => {
                    out.push(flag.clone().into());
                    out.push(n.to_string().into());
                }
                serde_json::Value::String(s) => {
                    out.push(flag.clone().into());
                    out.push(s.into());
                }
                _ => {
                    return Err(Failure::input(format!(
                        "{}: config key {key:?} must be a scalar or a list of scalars",
                        path.display()
                    )))
                }
            }
        }
    }
    Ok(out)
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> std::result::Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(bytes)
            .map_err(|e| Failure::input(format!("standard output: {e}"))),
    }
}

fn report_rejections(stderr: &mut dyn Write, path: &Path, rejections: &[Rejection]) {
    for r in rejections {
        let _ = writeln!(stderr, "warning: {}: row {}: {}", path.display(), r.row, r.reason);
    }
}

fn load_dataset(input: &IncomeArgs, stderr: &mut dyn Write) -> std::result::Result<(Dataset, usize), Failure> {
    let loaded = load_incomes_path(&input.incomes, &input.format()).map_err(ctx(input.incomes.display()))?;
    report_rejections(stderr, &input.incomes, &loaded.rejections);
    Ok((loaded.dataset, loaded.rejections.len()))
}

fn cmd_fit(a: FitArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let (mut ds, mut rejected) = load_dataset(&a.input, stderr)?;
    if let Some(label) = &a.label {
        ds.label = label.clone();
    }
    let label = ds.label.clone();
    let mut top_incomes = 0;
    if let Some(path) = &a.billionaires {
        let rate = a
            .usd_eur
            .ok_or_else(|| Failure::input("--billionaires needs --usd-eur"))?;
        let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let (records, rejections) = load_billionaires(file).map_err(ctx(path.display()))?;
        report_rejections(stderr, path, &rejections);
        rejected += rejections.len();
        let top = billionaire_effective_income(&records, rate, a.return_rate).map_err(ctx("billionaires"))?;
        top_incomes = top.len();
        ds = merge_datasets(&ds, &top, a.top_weight).map_err(ctx("merge"))?;
    }

    let ccdf = empirical_ccdf(&ds).map_err(ctx(&label))?;
    let config = FitConfig {
        tie_t1_m1: a.tie_t1_m1,
        seed: a.seed,
        bootstrap_resamples: a.bootstrap,
        restarts: a.restarts,
        grid_points: a.grid_points,
        tail_trim: a.tail_trim,
        max_evaluations: a.max_evaluations,
        ..FitConfig::default()
    };
    let mut result = fit(&ccdf, &config).map_err(ctx("fit"))?;
    let mut code = EXIT_OK;
    if !result.converged {
        let _ = writeln!(stderr, "warning: fit did not converge; best candidate written");
        code = EXIT_NOT_CONVERGED;
    } else if a.bootstrap > 0 {
        match bootstrap_errors(&ds, &config, &result.params) {
            Ok(e) => result.errors = Some(e),
            Err(e @ Error::UnreliableErrors { .. }) => {
                let _ = writeln!(stderr, "warning: {e}; errors left empty");
                code = EXIT_NOT_CONVERGED;
            }
            Err(e) => return Err(Failure::from_error("bootstrap", e)),
        }
    }

    let output = FitOutput {
        dataset: DatasetSummary {
            label,
            records: ds.len(),
            total_weight: ds.total_weight(),
            top_incomes,
            rejected_rows: rejected,
        },
        crisis: crisis_indicator(&result.params, a.crisis_threshold),
        crisis_threshold: a.crisis_threshold,
        fit: result,
    };
    let mut json = serde_json::to_vec_pretty(&output).map_err(|e| Failure::from_error("json", e.into()))?;
    json.push(b'\n');
    emit(a.out.as_deref(), stdout, &json)?;
    Ok(code)
}

fn resolve_params(source: &ParamSource) -> std::result::Result<Params, Failure> {
    let params = match (&source.params, &source.row) {
        (Some(path), _) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let inner = value.get("params").cloned().unwrap_or(value);
            serde_json::from_value::<Params>(inner)
                .map_err(|e| Failure::input(format!("{}: not a parameter object: {e}", path.display())))?
        }
        (None, Some(label)) => reference_rows()
            .into_iter()
            .find(|r| &r.label == label)
            .map(|r| r.params)
            .ok_or_else(|| Failure::input(format!("no reference row {label:?} (have 2005-2010)")))?,
        (None, None) => return Err(Failure::input("give --params PATH or --row LABEL")),
    };
    params.validate().map_err(ctx("parameters"))?;
    Ok(params)
}

fn csv_bytes<F>(header: &[&str], fill: F) -> std::result::Result<Vec<u8>, Failure>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> std::result::Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)
            .and_then(|_| fill(&mut w))
            .map_err(|e| Failure::from_error("csv", e.into()))?;
        w.flush().map_err(|e| Failure::input(format!("csv: {e}")))?;
    }
    Ok(buf)
}

fn cmd_plotdata(a: PlotArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let params = resolve_params(&a.source)?;
    let (ds, _) = load_dataset(&a.input, stderr)?;
    let ccdf = empirical_ccdf(&ds).map_err(ctx(a.input.incomes.display()))?;
    let model = normalize(params, DEFAULT_QUAD_TOL).map_err(ctx("model"))?;

    let points: Vec<_> = ccdf.points().iter().filter(|q| q.m > 0.0).copied().collect();
    if points.is_empty() {
        return Err(Failure::input(format!("{}: no positive incomes", a.input.incomes.display())));
    }
    let ms: Vec<f64> = points.iter().map(|q| q.m).collect();
    let model_at_points = model.ccdf_grid(&ms).map_err(ctx("model"))?;
    let curve = log_grid(ms[0], ms[ms.len() - 1], a.model_points);
    let model_curve = model.ccdf_grid(&curve).map_err(ctx("model"))?;
    let markers = [("m0", params.m0), ("m1", params.m1)];

    let bytes = csv_bytes(&["series", "m", "empirical_ccdf", "model_ccdf"], |w| {
        for (q, c) in points.iter().zip(&model_at_points) {
            w.write_record(["empirical", &q.m.to_string(), &q.p.to_string(), &c.to_string()])?;
        }
        for (m, c) in curve.iter().zip(&model_curve) {
            w.write_record(["model", &m.to_string(), "", &c.to_string()])?;
        }
        for (name, m) in markers {
            let c = model.ccdf(m).unwrap_or(f64::NAN);
            w.write_record([name, &m.to_string(), "", &c.to_string()])?;
        }
        Ok(())
    })?;
    emit(a.out.as_deref(), stdout, &bytes)?;
    Ok(EXIT_OK)
}

fn cmd_sample(a: SampleArgs, stdout: &mut dyn Write) -> CmdResult {
    let params = resolve_params(&a.source)?;
    let model = normalize(params, DEFAULT_QUAD_TOL).map_err(ctx("model"))?;
    let xs = model.sample(a.n, a.seed).map_err(ctx("sample"))?;
    let bytes = csv_bytes(&["income"], |w| {
        for x in &xs {
            w.write_record([x.to_string()])?;
        }
        Ok(())
    })?;
    emit(a.out.as_deref(), stdout, &bytes)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(a: SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let params = resolve_params(&a.source)?;
    let coeffs = FpCoefficients::realizing(&params, a.b).map_err(ctx("coefficients"))?;
    let config = SimConfig {
        coeffs,
        m1: params.m1,
        n_agents: a.agents,
        dt: a.dt,
        n_steps: a.steps,
        seed: a.seed,
        record_stride: a.stride.unwrap_or(a.steps.max(1)),
    };
    let mut code = EXIT_OK;
    let snapshots = if a.until_stationary {
        let rule = StationarityRule {
            first_check: a.first_check,
            ks_threshold: a.ks_threshold,
            max_time: a.max_time,
        };
        let run = run_to_stationarity(&config, rule).map_err(ctx("simulate"))?;
        for (t, ks) in &run.checks {
            let _ = writeln!(stderr, "t={t} KS(t, 2t)={ks:.5}");
        }
        if !run.reached {
            let _ = writeln!(stderr, "warning: not stationary by t={}", run.snapshot.time);
            code = EXIT_NOT_CONVERGED;
        }
        vec![run.snapshot]
    } else {
        simulate_ensemble(&config).map_err(ctx("simulate"))?
    };
    let mut bytes = Vec::new();
    write_snapshots_csv(&mut bytes, &snapshots).map_err(ctx("csv"))?;
    emit(a.out.as_deref(), stdout, &bytes)?;
    Ok(code)
}

fn cmd_report(a: ReportArgs, stdout: &mut dyn Write) -> CmdResult {
    let rows: Vec<ReportRow> = if a.fits.is_empty() {
        reference_rows()
            .into_iter()
            .map(|r| ReportRow::new(r.label, r.params, r.errors, a.crisis_threshold))
            .collect()
    } else {
        a.fits
            .iter()
            .map(|path| {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                let out: FitOutput = serde_json::from_str(&text)
                    .map_err(|e| Failure::input(format!("{}: not a fit result: {e}", path.display())))?;
                Ok(ReportRow::new(
                    out.dataset.label,
                    out.fit.params,
                    out.fit.errors,
                    a.crisis_threshold,
                ))
            })
            .collect::<std::result::Result<_, Failure>>()?
    };
    let exclude: BTreeSet<String> = a.exclude.iter().cloned().collect();
    let summary = aggregate_params(&rows, &exclude).map_err(ctx("report"))?;

    let mut bytes = match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                rows: &'a [ReportRow],
                crisis_threshold: f64,
                excluded: Vec<String>,
                aggregate: &'a crate::report::AggregateSummary,
            }
            serde_json::to_vec_pretty(&Report {
                rows: &rows,
                crisis_threshold: a.crisis_threshold,
                excluded: exclude.iter().cloned().collect(),
                aggregate: &summary,
            })
            .map_err(|e| Failure::from_error("json", e.into()))?
        }
        Format::Text => {
            let mut s = render_table(&rows);
            let m = &summary.mean;
            s.push_str(&format!(
                "\nmean over {} ({}): T {} m0 {} alpha {:.3} T1 {} m1 {} alpha1 {:.3}\n",
                summary.labels.join(", "),
                if exclude.is_empty() {
                    "all rows".to_string()
                } else {
                    format!("excluding {}", exclude.iter().cloned().collect::<Vec<_>>().join(", "))
                },
                round_thousand(m.t_low),
                m.m0.round(),
                m.alpha,
                round_thousand(m.t_high),
                m.m1.round(),
                m.alpha1
            ));
            s.into_bytes()
        }
    };
    if a.format == Format::Json {
        bytes.push(b'\n');
    }
    emit(a.out.as_deref(), stdout, &bytes)?;
    Ok(EXIT_OK)
}

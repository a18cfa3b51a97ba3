//! Command-line front end.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input, 2 invalid request
//! (unknown column, bad flag value, nothing to score), 3 numerical failure.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mttm_core::{fit_with_clock, impute_with_params, Dataset, FillPolicy, FitConfig, SweepOrder};

use crate::clock::SystemClock;
use crate::harness::{
    apply_censoring, benchmark_compare, convergence_probe, random_truth, reports_json, reports_tsv, runtime_probe,
    runtime_tsv, BenchmarkSpec, CensoringScenario, DataSource, HarnessError, Side,
};
use crate::model_file::{ModelDocument, ModelFileError};
use crate::table::{Layout, Table, TableError};

#[derive(Debug, Parser)]
#[command(
    name = "mttm",
    version,
    about = "Multi-target Tobit regression for tables with censored columns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to a CSV table and write the model document.
    Fit(FitCmd),
    /// Replace censored target cells by their posterior means.
    Impute(ImputeCmd),
    /// Compare multi-target and single-target imputation under artificial censoring.
    Simulate(SimulateCmd),
    /// Time a fixed number of sweeps for several sample sizes.
    Runtime(RuntimeCmd),
    /// Print the objective gap to a long-run optimum after every sweep.
    Converge(ConvergeCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Cyclic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
    Interval,
}

impl From<SideArg> for Side {
    fn from(side: SideArg) -> Self {
        match side {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
            SideArg::Interval => Side::Interval,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitFlags {
    /// Ridge penalty.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 500)]
    pub max_sweeps: usize,
    /// Stop when the relative objective change falls below this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Order of the censored-cell updates within a sweep.
    #[arg(long, value_enum, default_value_t = Order::Cyclic)]
    pub order: Order,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FitFlags {
    pub fn config(&self) -> FitConfig {
        FitConfig {
            lambda_reg: self.lambda,
            max_sweeps: self.max_sweeps,
            rel_tol: self.tol,
            sweep_order: match self.order {
                Order::Cyclic => SweepOrder::Cyclic,
                Order::Random => SweepOrder::Random(self.seed),
            },
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitCmd {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Comma-separated target column names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<String>,
    /// Do not append a constant feature.
    #[arg(long)]
    pub no_intercept: bool,
    /// Where to write the model document.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct ImputeCmd {
    pub input: PathBuf,
    /// Previously fitted model; otherwise the model is fitted to the input.
    #[arg(long, conflicts_with_all = ["targets", "no_intercept"])]
    pub model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required_unless_present = "model")]
    pub targets: Vec<String>,
    #[arg(long)]
    pub no_intercept: bool,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append a `<target>_imputed` true/false column per target.
    #[arg(long)]
    pub mark: bool,
    #[command(flatten)]
    pub fit: FitFlags,
}

/// Data for the simulation commands: synthetic unless `--input` is given.
#[derive(Debug, Clone, Args)]
pub struct SourceFlags {
    /// Fully observed CSV to subsample instead of synthetic data.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', requires = "input")]
    pub targets: Vec<String>,
    #[arg(long)]
    pub no_intercept: bool,
    /// Number of targets (synthetic).
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Number of features (synthetic).
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Examples per trial.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Typical magnitude of the cross-target coefficients (synthetic).
    #[arg(long, default_value_t = 0.5)]
    pub a_magnitude: f64,
    /// Noise precision (synthetic).
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub source: SourceFlags,
    /// Censoring rates, comma-separated; one report row each.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub rate: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SideArg::Left)]
    pub side: SideArg,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct RuntimeCmd {
    /// Sample sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "10,30,100,300,1000")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ConvergeCmd {
    #[command(flatten)]
    pub source: SourceFlags,
    /// Artificial censoring rate for synthetic data.
    #[arg(long, default_value_t = 0.2)]
    pub rate: f64,
    #[arg(long, value_enum, default_value_t = SideArg::Left)]
    pub side: SideArg,
    #[command(flatten)]
    pub fit: FitFlags,
}

/// Message plus exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn parse(message: impl fmt::Display) -> Self {
        CliError {
            code: 1,
            message: message.to_string(),
        }
    }

    fn validation(message: impl fmt::Display) -> Self {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        if e.is_validation() {
            CliError::validation(e)
        } else {
            CliError::parse(e)
        }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::parse(e)
    }
}

impl From<mttm_core::Error> for CliError {
    fn from(e: mttm_core::Error) -> Self {
        CliError {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::Trial { .. } => 3,
            other if other.is_numerical() => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_error(path: &str) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::parse(format!("{path}: {e}"))
}

/// Parses `args` (program name first) and runs the command, writing results
/// to standard output and diagnostics to standard error. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Fit(cmd) => cmd_fit(cmd, out),
        Command::Impute(cmd) => cmd_impute(cmd, out),
        Command::Simulate(cmd) => cmd_simulate(cmd, out),
        Command::Runtime(cmd) => cmd_runtime(cmd, out),
        Command::Converge(cmd) => cmd_converge(cmd, out),
    }
}

fn load(input: &Path, targets: &[String], no_intercept: bool) -> Result<(Table, Layout, Dataset), CliError> {
    let table = Table::from_path(input)?;
    let layout = table.layout(targets, !no_intercept)?;
    let data = table.dataset(&layout)?;
    Ok((table, layout, data))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(io_error("<stdout>"))
}

fn cmd_fit(cmd: FitCmd, out: &mut dyn Write) -> Result<(), CliError> {
    let (_, _, data) = load(&cmd.input, &cmd.targets, cmd.no_intercept)?;
    let config = cmd.fit.config();
    let outcome = fit_with_clock(&data, &config, &SystemClock::new())?;
    let report = &outcome.report;
    if let Some(path) = &cmd.model_out {
        let doc = ModelDocument::new(
            &outcome.params,
            data.target_names().to_vec(),
            data.feature_names().to_vec(),
            config.lambda_reg,
            report,
        );
        doc.save(path)?;
    }
    emit(
        out,
        &format!(
            "sweeps\t{}\nobjective\t{}\nconverged\t{}\nelapsed_seconds\t{:.6}\nbeta\t{}\n",
            report.sweeps_run,
            report.final_objective().unwrap_or(f64::NAN),
            report.converged,
            report.elapsed_seconds,
            outcome.params.beta,
        ),
    )
}

fn cmd_impute(cmd: ImputeCmd, out: &mut dyn Write) -> Result<(), CliError> {
    let config = cmd.fit.config();
    let table = Table::from_path(&cmd.input)?;
    let (layout, data, completed) = match &cmd.model {
        Some(path) => {
            let doc = ModelDocument::load(path)?;
            let layout = table.layout_for(&doc.target_names, &doc.feature_names)?;
            let data = table.dataset(&layout)?;
            let completed = impute_with_params(&data, &doc.params()?, &config)?;
            (layout, data, completed)
        }
        None => {
            let layout = table.layout(&cmd.targets, !cmd.no_intercept)?;
            let data = table.dataset(&layout)?;
            let completed = mttm_core::impute(&data, &config)?.completed;
            (layout, data, completed)
        }
    };
    let done = table.completed(&layout, &data, &completed, cmd.mark);
    match &cmd.out {
        Some(path) => {
            let name = path.display().to_string();
            let file = std::fs::File::create(path).map_err(io_error(&name))?;
            done.write(io::BufWriter::new(file))?;
        }
        None => done.write(out)?,
    }
    Ok(())
}

fn scenario_name(source: &SourceFlags, side: Side) -> String {
    let stem = source
        .input
        .as_ref()
        .and_then(|p| p.file_stem())
        .map_or_else(|| "synthetic".to_string(), |s| s.to_string_lossy().into_owned());
    format!("{stem}-{side}")
}

fn data_source(source: &SourceFlags, seed: u64) -> Result<DataSource, CliError> {
    match &source.input {
        Some(path) => {
            let (_, _, data) = load(path, &source.targets, source.no_intercept)?;
            Ok(DataSource::Table { data, sample: source.n })
        }
        None => Ok(DataSource::Synthetic {
            truth: random_truth(source.m, source.d, source.a_magnitude, source.beta, seed)?,
            n: source.n,
        }),
    }
}

fn cmd_simulate(cmd: SimulateCmd, out: &mut dyn Write) -> Result<(), CliError> {
    let source = data_source(&cmd.source, cmd.fit.seed)?;
    let m = match &source {
        DataSource::Synthetic { truth, .. } => truth.m(),
        DataSource::Table { data, .. } => data.m(),
    };
    let side = Side::from(cmd.side);
    let mut reports = Vec::with_capacity(cmd.rate.len());
    for &rate in &cmd.rate {
        let spec = BenchmarkSpec {
            name: scenario_name(&cmd.source, side),
            source: source.clone(),
            scenario: CensoringScenario {
                rate,
                targets: (0..m).collect(),
                side,
            },
            trials: cmd.trials,
            seed: cmd.fit.seed,
            config: cmd.fit.config(),
            fill: FillPolicy::DetectionLimit,
        };
        reports.push(benchmark_compare(&spec)?);
    }
    let text = match cmd.format {
        Format::Tsv => reports_tsv(&reports),
        Format::Json => reports_json(&reports),
    };
    match &cmd.out {
        Some(path) => std::fs::write(path, text).map_err(io_error(&path.display().to_string())),
        None => emit(out, &text),
    }
}

fn cmd_runtime(cmd: RuntimeCmd, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = runtime_probe(&cmd.n_grid, cmd.m, cmd.d, cmd.sweeps, cmd.seed, &SystemClock::new())?;
    emit(out, &runtime_tsv(&rows))
}

fn cmd_converge(cmd: ConvergeCmd, out: &mut dyn Write) -> Result<(), CliError> {
    let config = cmd.fit.config();
    let data = match &cmd.source.input {
        Some(path) => load(path, &cmd.source.targets, cmd.source.no_intercept)?.2,
        None => {
            let s = &cmd.source;
            let truth = random_truth(s.m, s.d, s.a_magnitude, s.beta, cmd.fit.seed)?;
            let full = crate::harness::generate_synthetic(&truth, s.n, cmd.fit.seed)?.data;
            let scenario = CensoringScenario {
                rate: cmd.rate,
                targets: (0..s.m).collect(),
                side: cmd.side.into(),
            };
            apply_censoring(&full, &scenario)?.0
        }
    };
    let trace = convergence_probe(&data, &config)?;
    let mut text = format!("# f_star\t{}\nsweep\tobjective\tgap\n", trace.f_star);
    for (t, (f, gap)) in trace.objective.iter().zip(&trace.gaps).enumerate() {
        text.push_str(&format!("{}\t{}\t{:e}\n", t + 1, f, gap));
    }
    emit(out, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_map_onto_the_fit_configuration() {
        let cli = Cli::try_parse_from([
            "mttm",
            "fit",
            "t.csv",
            "--targets",
            "A,B",
            "--lambda",
            "0",
            "--tol",
            "1e-6",
            "--order",
            "random",
            "--seed",
            "9",
        ])
        .unwrap();
        let Command::Fit(cmd) = cli.command else {
            panic!("expected fit")
        };
        assert_eq!(cmd.targets, ["A", "B"]);
        let config = cmd.fit.config();
        assert_eq!(config.lambda_reg, 0.0);
        assert_eq!(config.rel_tol, 1e-6);
        assert_eq!(config.sweep_order, SweepOrder::Random(9));
    }

    #[test]
    fn usage_errors_exit_with_validation_code() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run_with(["mttm", "fit", "t.csv"], &mut out, &mut err), 2);
        assert_eq!(run_with(["mttm", "fit", "--help"], &mut out, &mut err), 0);
        let help = String::from_utf8(out).unwrap();
        for flag in [
            "--targets",
            "--lambda",
            "--max-sweeps",
            "--tol",
            "--order",
            "--seed",
            "--model-out",
        ] {
            assert!(help.contains(flag), "{flag} missing from help");
        }
    }

    #[test]
    fn zero_sweeps_is_rejected() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run_with(["mttm", "runtime", "--sweeps", "0"], &mut out, &mut err), 2);
    }
}

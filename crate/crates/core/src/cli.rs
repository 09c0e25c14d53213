//! Command-line front end: configuration resolution, the `simulate`,
//! `setpoint-map` and `sweep` commands, and CSV emission.
//!
//! Exit codes: 0 success, 2 configuration error, 3 integration fault.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scenarios::{
    compute_metrics, robustness_sweep, run_scenario, ControllerKind, Scenario, SimulationTrace,
    TrackingMetrics, BUILTIN_SCENARIOS,
};
use crate::steady_state::{light_grid, setpoint_map, SearchConfig, VALID_LIGHT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAULT: i32 = 3;

pub const TRACE_HEADER: &str = "t,x_true,y_meas,y_ref,d_applied,q0,f_est";
pub const METRICS_HEADER: &str =
    "controller,mu0,offset,iae,settle_time,batch_duration,offset_window_reduced";
pub const SUMMARY_HEADER: &str = "controller,mu0,offset,iae,settle_time,batch_duration,status";
pub const SETPOINT_HEADER: &str = "q0,x_star,d_star,productivity";

/// Short override keys and the scenario path they stand for.
const KEY_ALIASES: [(&str, &str); 3] = [
    ("controller.mu0", "controller.model.mu0"),
    ("mu0", "controller.model.mu0"),
    ("seed", "noise.seed"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Integration { .. } => EXIT_FAULT,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Builtin(String),
    Inline(Box<Scenario>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_mu0_values")]
    pub mu0_values: Vec<f64>,
    #[serde(default = "default_controllers")]
    pub controllers: Vec<ControllerKind>,
}

fn default_mu0_values() -> Vec<f64> {
    vec![0.07, 0.14, 0.21]
}

fn default_controllers() -> Vec<ControllerKind> {
    vec![ControllerKind::Fl, ControllerKind::Ip]
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            mu0_values: default_mu0_values(),
            controllers: default_controllers(),
        }
    }
}

/// Contents of a run configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<ScenarioSource>,
    pub controller: Option<ControllerKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Dotted scenario keys to override, e.g. `"controller.mu0" = 0.21`.
    #[serde(default)]
    pub set: toml::Table,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("malformed config {}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pbrsim",
    about = "Photobioreactor biomass regulation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop scenario and write trace.csv and metrics.csv.
    Simulate(RunArgs),
    /// Tabulate productivity-optimal setpoints over a light range.
    SetpointMap(MapArgs),
    /// Run every (controller, mu0) cell of a robustness sweep.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario name (paper-4.1 or paper-4.2).
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub controller: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a scenario value, e.g. --set controller.mu0=0.21.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    #[arg(long, default_value_t = 100.0)]
    pub min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub max: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Output CSV file.
    #[arg(long, default_value = "setpoint_map.csv")]
    pub out: PathBuf,
    /// Override plant values, e.g. --set plant.full.k=110.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated mu0 values, replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    pub mu0: Vec<f64>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::SetpointMap(a) => cmd_setpoint_map(&a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(&a).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("pbrsim: {}", e.message);
            e.code
        }
    }
}

/// Fixed 9-significant-digit scientific notation.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 110);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(r.t),
            fmt_num(r.x_true),
            fmt_num(r.y_meas),
            fmt_num(r.y_ref),
            fmt_num(r.d_applied),
            fmt_num(r.q0),
            fmt_opt(r.f_est)
        );
    }
    out
}

fn metrics_fields(m: &TrackingMetrics) -> String {
    format!(
        "{},{},{},{}",
        fmt_num(m.steady_state_offset),
        fmt_num(m.iae),
        fmt_opt(m.settle_time),
        fmt_num(m.batch_phase_duration)
    )
}

pub fn metrics_csv(controller: ControllerKind, mu0: f64, m: &TrackingMetrics) -> String {
    format!(
        "{METRICS_HEADER}\n{controller},{},{},{}\n",
        fmt_num(mu0),
        metrics_fields(m),
        m.offset_window_reduced
    )
}

fn parse_override(raw: &str) -> CliResult<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{raw}' is not KEY=VALUE")))?;
    let key = key.trim();
    let value = value.trim();
    if key.is_empty() {
        return Err(CliError::config(format!(
            "override '{raw}' has an empty key"
        )));
    }
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

fn canonical_key(key: &str) -> &str {
    KEY_ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map_or(key, |(_, full)| full)
}

fn apply_override(root: &mut toml::Table, key: &str, value: toml::Value) -> CliResult<()> {
    let path = canonical_key(key);
    let mut parts = path.split('.').peekable();
    let mut table = root;
    while let Some(part) = parts.next() {
        let slot = table
            .get_mut(part)
            .ok_or_else(|| CliError::config(format!("unknown override key '{key}'")))?;
        if parts.peek().is_none() {
            *slot = match (&*slot, value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (toml::Value::Table(_), _) | (toml::Value::Array(_), _) => {
                    return Err(CliError::config(format!(
                        "override key '{key}' names a table, not a value"
                    )))
                }
                (_, v) => v,
            };
            return Ok(());
        }
        table = slot
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("unknown override key '{key}'")))?;
    }
    Err(CliError::config(format!("unknown override key '{key}'")))
}

/// Merges the config file, built-in scenario and command-line flags into a
/// validated scenario. Flags win over the file.
pub fn resolve_scenario(args: &RunArgs) -> CliResult<(Scenario, RunConfig)> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let source = match (&args.scenario, &cfg.scenario) {
        (Some(name), _) => ScenarioSource::Builtin(name.clone()),
        (None, Some(src)) => src.clone(),
        (None, None) => ScenarioSource::Builtin(BUILTIN_SCENARIOS[0].to_string()),
    };
    let mut scenario = match source {
        ScenarioSource::Builtin(name) => Scenario::builtin(&name).ok_or_else(|| {
            CliError::config(format!(
                "unknown scenario '{name}' (built-ins: {})",
                BUILTIN_SCENARIOS.join(", ")
            ))
        })?,
        ScenarioSource::Inline(s) => *s,
    };
    let controller = match &args.controller {
        Some(c) => Some(c.parse::<ControllerKind>()?),
        None => cfg.controller,
    };
    if let Some(kind) = controller {
        scenario.controller.kind = kind;
    }

    let mut tree = toml::Table::try_from(&scenario)
        .map_err(|e| CliError::config(format!("cannot serialize scenario: {e}")))?;
    for (key, value) in &cfg.set {
        apply_override(&mut tree, key, value.clone())?;
    }
    for raw in &args.overrides {
        let (key, value) = parse_override(raw)?;
        apply_override(&mut tree, &key, value)?;
    }
    if let Some(seed) = args.seed.or(cfg.seed) {
        let seed = i64::try_from(seed)
            .map_err(|_| CliError::config(format!("seed {seed} is too large")))?;
        apply_override(&mut tree, "noise.seed", toml::Value::Integer(seed))?;
    }
    let scenario: Scenario = tree
        .try_into()
        .map_err(|e| CliError::config(format!("invalid scenario after overrides: {e}")))?;
    scenario.validate()?;
    Ok((scenario, cfg))
}

fn output_dir(args: &RunArgs, cfg: &RunConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_files(dir: &Path, files: &[(String, String)]) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs one scenario; returns the output directory.
pub fn cmd_simulate(args: &RunArgs) -> CliResult<PathBuf> {
    let (scenario, cfg) = resolve_scenario(args)?;
    let dir = output_dir(args, &cfg);
    let trace = run_scenario(&scenario)?;
    let metrics = compute_metrics(&trace)?;
    write_files(
        &dir,
        &[
            ("trace.csv".into(), trace_csv(&trace)),
            (
                "metrics.csv".into(),
                metrics_csv(
                    scenario.controller.kind,
                    scenario.controller.model.mu0,
                    &metrics,
                ),
            ),
        ],
    )?;
    Ok(dir)
}

/// Writes the setpoint table; returns the number of rows.
pub fn cmd_setpoint_map(args: &MapArgs) -> CliResult<usize> {
    if !(VALID_LIGHT.0 <= args.min && args.min < args.max && args.max <= VALID_LIGHT.1) {
        return Err(CliError::config(format!(
            "light range must satisfy 100 <= min < max <= 1000, got [{}, {}]",
            args.min, args.max
        )));
    }
    if args.steps < 2 {
        return Err(CliError::config(format!(
            "setpoint map needs >= 2 steps, got {}",
            args.steps
        )));
    }
    let run = RunArgs {
        overrides: args.overrides.clone(),
        ..RunArgs::default()
    };
    let (scenario, _) = resolve_scenario(&run)?;
    let grid = light_grid(args.min, args.max, args.steps);
    let table = setpoint_map(&grid, &scenario.plant.full, &SearchConfig::default())?;
    let mut out = String::from(SETPOINT_HEADER);
    out.push('\n');
    for op in &table {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(op.q0),
            fmt_num(op.x_star),
            fmt_num(op.d_star),
            fmt_num(op.productivity)
        );
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(&args.out, out)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", args.out.display())))?;
    Ok(table.len())
}

pub fn sweep_trace_name(controller: ControllerKind, mu0: f64) -> String {
    format!("trace_{controller}_mu0_{mu0}.csv")
}

/// Runs the sweep; returns the output directory. Fails with exit code 3
/// only when every cell failed.
pub fn cmd_sweep(args: &SweepArgs) -> CliResult<PathBuf> {
    let (scenario, cfg) = resolve_scenario(&args.run)?;
    let mut spec = cfg.sweep.clone().unwrap_or_default();
    if !args.mu0.is_empty() {
        spec.mu0_values = args.mu0.clone();
    }
    let dir = output_dir(&args.run, &cfg);
    let cells = robustness_sweep(&scenario, &spec.mu0_values, &spec.controllers)?;

    let mut files = Vec::new();
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut succeeded = 0;
    for cell in &cells {
        let outcome = cell
            .trace
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|tr| compute_metrics(tr).map(|m| (tr, m)));
        match outcome {
            Ok((trace, m)) => {
                succeeded += 1;
                files.push((
                    sweep_trace_name(cell.controller, cell.mu0),
                    trace_csv(trace),
                ));
                let _ = writeln!(
                    summary,
                    "{},{},{},ok",
                    cell.controller,
                    fmt_num(cell.mu0),
                    metrics_fields(&m)
                );
            }
            Err(e) => {
                log::error!(
                    "sweep cell {} mu0={} failed: {e}",
                    cell.controller,
                    cell.mu0
                );
                let status = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(
                    summary,
                    "{},{},,,,,failed: {status}",
                    cell.controller,
                    fmt_num(cell.mu0)
                );
            }
        }
    }
    files.push(("summary.csv".into(), summary));
    write_files(&dir, &files)?;
    if succeeded == 0 {
        return Err(CliError {
            code: EXIT_FAULT,
            message: "every sweep cell failed".into(),
        });
    }
    Ok(dir)
}

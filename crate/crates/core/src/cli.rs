//! Command-line front end.
//!
//! Every option can also come from a flat `key=value` config file given with
//! `--config`; keys are flag names with dashes/underscores optional
//! (`t-end`, `t_end` and `tend` are the same key). Flags win over the file,
//! the file wins over built-in defaults.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::Error;
use crate::experiments::{self, Axis, FigureId, InitialState, Observable, PresetData, PresetOverrides, SweepGrid, SweepSpec};
use crate::integrator::{evolve_master, IntegrationConfig, TimeSeries};
use crate::model::{rotation_to_amplitudes, FeedbackVector, MasterEquation, RotationForm, SystemParams};
use crate::parallel::{self, Execution};
use crate::trajectories::{run_ensemble, EnsembleConfig, NoJumpScheme};
use crate::VERSION;

pub const TIMESERIES_HEADER: &str = "t,rho1_ee,rho1_gg,abs_rho_eg,px,py,pz,concurrence,purity";
pub const GRID_HEADER: &str = "axis,axis_value,t,observable,value";
pub const THREADS_ENV: &str = "JUMPFEED_THREADS";

#[derive(Debug, Parser)]
#[command(name = "jumpfeed", version, about = "Quantum-jump feedback control of two coupled qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the master equation and write a time-series CSV.
    Simulate(SimulateArgs),
    /// Sweep one feedback amplitude and write a long-form grid CSV.
    Sweep(SweepArgs),
    /// Average quantum-jump trajectories and write a time-series CSV.
    Trajectories(TrajectoryArgs),
    /// Reproduce a named figure preset.
    Figure(FigureArgs),
    /// Convert a rotation (angle, theta, phi) into feedback amplitudes.
    ConvertRotation(RotationArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Flat key=value file supplying defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    omega1: Option<f64>,
    #[arg(long)]
    omega2: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ax: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ay: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    az: Option<f64>,
    /// plus_plus, ge, ee, gg or custom.
    #[arg(long)]
    init: Option<String>,
    /// Custom state as 8 comma-separated reals: re,im for |ee>,|eg>,|ge>,|gg>.
    #[arg(long, allow_hyphen_values = true)]
    amplitudes: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    sample_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// ax, ay or az.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    /// abs_rho_eg or concurrence.
    #[arg(long)]
    observable: Option<String>,
}

#[derive(Debug, Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// exponential or first-order.
    #[arg(long)]
    no_jump: Option<String>,
}

#[derive(Debug, Args)]
struct FigureArgs {
    /// fig1a, fig1b, fig2a, fig2b, fig2c, fig3, fig4a, fig4b, fig5a or fig5b.
    id: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    sample_every: Option<usize>,
    #[arg(long)]
    n_points: Option<usize>,
}

#[derive(Debug, Args)]
struct RotationArgs {
    #[arg(long, allow_hyphen_values = true)]
    angle: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    phi: f64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    match parallel::with_thread_cap(threads, || dispatch(cli.command)) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn thread_cap() -> std::result::Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
        },
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Trajectories(a) => trajectories_cmd(a),
        Command::Figure(a) => figure_cmd(a),
        Command::ConvertRotation(a) => convert_rotation(a),
    }
}

/// Flat `key=value` configuration.
#[derive(Debug, Default)]
struct ConfigFile(HashMap<String, String>);

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches('-').chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_lowercase()
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(ConfigFile::default()) };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|msg| CliError::Usage(format!("--config {}: {msg}", path.display())))
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut map = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            map.insert(normalize_key(k), v.trim().to_string());
        }
        Ok(ConfigFile(map))
    }

    /// Flag value, else config value, else `default`.
    fn resolve<T: FromStr>(&self, flag: &str, value: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.resolve_opt(flag, value)?.unwrap_or(default))
    }

    fn resolve_opt<T: FromStr>(&self, flag: &str, value: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if value.is_some() {
            return Ok(value);
        }
        match self.0.get(&normalize_key(flag)) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("--{flag} (from config): cannot parse `{raw}`: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
}

struct ResolvedModel {
    params: SystemParams,
    feedback: FeedbackVector,
    init: InitialState,
    integration: IntegrationConfig,
    out: PathBuf,
    format: OutputFormat,
}

fn usage(flag: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("--{flag}: {e}"))
}

fn resolve_model(a: ModelArgs, cfg: &ConfigFile, default_out: &str) -> CliResult<ResolvedModel> {
    let d = SystemParams::default();
    let params = SystemParams {
        omega1: cfg.resolve("omega1", a.omega1, d.omega1)?,
        omega2: cfg.resolve("omega2", a.omega2, d.omega2)?,
        g: cfg.resolve("g", a.g, d.g)?,
        gamma: cfg.resolve("gamma", a.gamma, d.gamma)?,
    };
    params.validate().map_err(|e| usage("omega1/omega2/g/gamma", e))?;

    let feedback = FeedbackVector::new(
        cfg.resolve("ax", a.ax, 0.0)?,
        cfg.resolve("ay", a.ay, 0.0)?,
        cfg.resolve("az", a.az, 0.0)?,
    );
    if !feedback.is_finite() {
        return Err(usage("ax/ay/az", "amplitudes must be finite"));
    }

    let init_name: String = cfg.resolve("init", a.init, "plus_plus".to_string())?;
    let init = if init_name == "custom" {
        let raw: String = cfg
            .resolve_opt("amplitudes", a.amplitudes)?
            .ok_or_else(|| usage("amplitudes", "required with --init custom"))?;
        let parts = raw
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| usage("amplitudes", e))?;
        InitialState::custom_from_amplitudes(&parts).map_err(|e| usage("amplitudes", e))?
    } else {
        init_name.parse().map_err(|e| usage("init", e))?
    };

    let di = IntegrationConfig::default();
    let integration = IntegrationConfig {
        dt: cfg.resolve("dt", a.dt, di.dt)?,
        t_end: cfg.resolve("t-end", a.t_end, di.t_end)?,
        sample_every: cfg.resolve("sample-every", a.sample_every, di.sample_every)?,
    };
    integration.validate().map_err(|e| usage("dt/t-end/sample-every", e))?;

    let out = cfg.resolve("out", a.out, PathBuf::from(default_out))?;
    let format = match cfg.resolve("format", a.format, "csv".to_string())?.as_str() {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => return Err(usage("format", format!("expected csv or json, got `{other}`"))),
    };
    Ok(ResolvedModel { params, feedback, init, integration, out, format })
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let cfg = ConfigFile::load(a.model.config.as_deref())?;
    let m = resolve_model(a.model, &cfg, "simulate.csv")?;
    let eq = MasterEquation::with_feedback(&m.params, &m.feedback);
    let series = evolve_master(&m.init.density(), &eq, &m.integration)?;
    let meta = metadata("simulate", &m, Value::Null);
    write_series(&m.out, m.format, &series, &meta)?;
    println!("wrote {} ({} samples)", m.out.display(), series.len());
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> CliResult<()> {
    let cfg = ConfigFile::load(a.model.config.as_deref())?;
    let m = resolve_model(a.model, &cfg, "sweep.csv")?;
    let axis: Axis = cfg.resolve("axis", a.axis, "ax".to_string())?.parse().map_err(|e| usage("axis", e))?;
    let observable: Observable = cfg
        .resolve("observable", a.observable, "abs_rho_eg".to_string())?
        .parse()
        .map_err(|e| usage("observable", e))?;
    let mut spec = SweepSpec::new(axis, observable, m.params, m.init.clone());
    spec.lo = cfg.resolve("lo", a.lo, spec.lo)?;
    spec.hi = cfg.resolve("hi", a.hi, spec.hi)?;
    spec.n_points = cfg.resolve("n-points", a.n_points, spec.n_points)?;
    spec.base_feedback = m.feedback;
    spec.integration = m.integration;
    spec.validate().map_err(|e| usage("lo/hi/n-points", e))?;

    let grid = experiments::sweep(&spec, Execution::Parallel)?;
    let mut meta = metadata("sweep", &m, Value::Null);
    meta["sweep"] = json!({
        "axis": axis.name(), "lo": spec.lo, "hi": spec.hi,
        "n_points": spec.n_points, "observable": observable.name(),
    });
    write_grid(&m.out, m.format, &grid, &meta)?;
    println!("wrote {} ({} x {} grid)", m.out.display(), grid.axis_values.len(), grid.times.len());
    Ok(())
}

fn trajectories_cmd(a: TrajectoryArgs) -> CliResult<()> {
    let cfg = ConfigFile::load(a.model.config.as_deref())?;
    let m = resolve_model(a.model, &cfg, "trajectories.csv")?;
    let d = EnsembleConfig::default();
    let no_jump: NoJumpScheme = cfg
        .resolve("no-jump", a.no_jump, "exponential".to_string())?
        .parse()
        .map_err(|e| usage("no-jump", e))?;
    let ens = EnsembleConfig {
        n_traj: cfg.resolve("n-traj", a.n_traj, d.n_traj)?,
        seed: cfg.resolve("seed", a.seed, d.seed)?,
        dt: m.integration.dt,
        t_end: m.integration.t_end,
        sample_every: m.integration.sample_every,
        no_jump,
    };
    ens.validate().map_err(|e| usage("n-traj", e))?;

    let result = run_ensemble(&m.init.density(), &m.params, &m.feedback, &ens, Execution::Parallel)
        .map_err(|e| match e {
            Error::NotPure { .. } => usage("init", e),
            other => CliError::Runtime(other),
        })?;
    let total: u64 = result.jump_counts.iter().map(|&c| c as u64).sum();
    let jumps = json!({
        "n_traj": ens.n_traj,
        "total": total,
        "mean": result.mean_jumps(),
        "std_error": result.jump_std_error(),
        "max": result.jump_counts.iter().copied().max().unwrap_or(0),
    });
    let mut meta = metadata("trajectories", &m, serde_json::to_value(ens).map_err(Error::from)?);
    meta["jumps"] = jumps;
    write_series(&m.out, m.format, &result.series, &meta)?;
    println!("wrote {} ({} samples)", m.out.display(), result.series.len());
    println!(
        "jumps: n_traj={} total={} mean={:.6} std_error={:.6}",
        ens.n_traj,
        total,
        result.mean_jumps(),
        result.jump_std_error()
    );
    Ok(())
}

fn figure_cmd(a: FigureArgs) -> CliResult<()> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let id: FigureId = a.id.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let di = IntegrationConfig::default();
    let integration = IntegrationConfig {
        dt: cfg.resolve("dt", a.dt, di.dt)?,
        t_end: cfg.resolve("t-end", a.t_end, di.t_end)?,
        sample_every: cfg.resolve("sample-every", a.sample_every, di.sample_every)?,
    };
    integration.validate().map_err(|e| usage("dt/t-end/sample-every", e))?;
    let n_points = cfg.resolve_opt("n-points", a.n_points)?;
    if matches!(n_points, Some(n) if n < 2) {
        return Err(usage("n-points", "must be at least 2"));
    }
    let out = cfg.resolve("out", a.out, PathBuf::from(format!("{id}.csv")))?;

    let preset = experiments::run_preset_with(id, PresetOverrides { integration: Some(integration), n_points }, Execution::Parallel)?;
    let base = json!({
        "params": preset.params,
        "init": preset.init,
        "integration": preset.integration,
        "ensemble": Value::Null,
        "version": VERSION,
        "command": "figure",
        "figure": id.name(),
    });
    match &preset.data {
        PresetData::Grid(grid) => {
            let mut meta = base.clone();
            meta["feedback"] = json!(FeedbackVector::zero());
            meta["sweep"] = json!({
                "axis": grid.axis.name(),
                "lo": grid.axis_values[0],
                "hi": grid.axis_values[grid.axis_values.len() - 1],
                "n_points": grid.axis_values.len(),
                "observable": grid.observable.name(),
            });
            write_grid(&out, OutputFormat::Csv, grid, &meta)?;
            println!("wrote {}", out.display());
        }
        PresetData::Series(runs) => {
            for run in runs {
                let path = labeled_path(&out, &run.label);
                let mut meta = base.clone();
                meta["feedback"] = json!(run.feedback);
                meta["label"] = json!(run.label);
                write_series(&path, OutputFormat::Csv, &run.series, &meta)?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn convert_rotation(a: RotationArgs) -> CliResult<()> {
    let r = RotationForm::new(a.angle, a.theta, a.phi).map_err(|e| usage("angle/theta/phi", e))?;
    let f = rotation_to_amplitudes(&r);
    // `+ 0.0` turns -0 into 0
    println!("ax={}", f.ax + 0.0);
    println!("ay={}", f.ay + 0.0);
    println!("az={}", f.az + 0.0);
    Ok(())
}

fn metadata(command: &str, m: &ResolvedModel, ensemble: Value) -> Value {
    json!({
        "params": m.params,
        "feedback": m.feedback,
        "init": m.init,
        "integration": m.integration,
        "ensemble": ensemble,
        "version": VERSION,
        "command": command,
    })
}

/// `dir/stem.label.ext` for `dir/stem.ext`.
pub fn labeled_path(out: &Path, label: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let ext = out.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{label}.{ext}"))
}

/// `run.csv` → `run.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn timeseries_csv(series: &TimeSeries) -> String {
    let mut s = String::with_capacity(64 * (series.len() + 1));
    s.push_str(TIMESERIES_HEADER);
    s.push('\n');
    for rec in &series.samples {
        let row: Vec<String> = rec.values().iter().map(|&v| fmt_float(v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn grid_csv(grid: &SweepGrid) -> String {
    let mut s = String::new();
    s.push_str(GRID_HEADER);
    s.push('\n');
    let (axis, obs) = (grid.axis.name(), grid.observable.name());
    for (value, row) in grid.axis_values.iter().zip(&grid.values) {
        for (t, v) in grid.times.iter().zip(row) {
            let _ = writeln!(s, "{axis},{},{},{obs},{}", fmt_float(*value), fmt_float(*t), fmt_float(*v));
        }
    }
    s
}

fn write_with_sidecar(out: &Path, body: &str, meta: &Value) -> CliResult<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, body)?;
    let meta = serde_json::to_string_pretty(meta).map_err(Error::from)?;
    fs::write(sidecar_path(out), meta + "\n")?;
    Ok(())
}

fn write_series(out: &Path, format: OutputFormat, series: &TimeSeries, meta: &Value) -> CliResult<()> {
    let body = match format {
        OutputFormat::Csv => timeseries_csv(series),
        OutputFormat::Json => serde_json::to_string_pretty(&series.samples).map_err(Error::from)? + "\n",
    };
    write_with_sidecar(out, &body, meta)
}

fn write_grid(out: &Path, format: OutputFormat, grid: &SweepGrid, meta: &Value) -> CliResult<()> {
    let body = match format {
        OutputFormat::Csv => grid_csv(grid),
        OutputFormat::Json => serde_json::to_string_pretty(grid).map_err(Error::from)? + "\n",
    };
    write_with_sidecar(out, &body, meta)
}

//! Command-line interface.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 configuration error, 4 divergence, 5 I/O error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::FileConfig;
use crate::metrics::{run_stats, ComparisonReport, RunStats, CHANNELS};
use crate::scenario::{run_scenario, ControllerKind, ScenarioConfig, Termination, TrajectoryLog};
use crate::verify::{run_suite, Suite};
use crate::{AerialManipulator, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Start of the metrics window used for the comparison [s].
pub const METRIC_WINDOW_START: f64 = 10.0;

#[derive(Debug, Parser)]
#[command(name = "amsim", version, about = "Aerial manipulator simulation and controller benchmarking")]
pub struct Cli {
    /// Print the default configuration file and exit.
    #[arg(long, global = true)]
    pub print_default_config: bool,

    /// Override the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its log, summary and manifest.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured controller.
        #[arg(long, value_enum)]
        controller: Option<ControllerArg>,
    },
    /// Run the scenario under all three controllers and print the error table.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report and the three logs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the model oracle suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerArg {
    Pid,
    PidFf,
    Annb,
}

impl From<ControllerArg> for ControllerKind {
    fn from(c: ControllerArg) -> Self {
        match c {
            ControllerArg::Pid => ControllerKind::Pid,
            ControllerArg::PidFf => ControllerKind::PidFf,
            ControllerArg::Annb => ControllerKind::Annb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Kinematics,
    Inertia,
    Dynamics,
    Disturbance,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Kinematics => Suite::Kinematics,
            SuiteArg::Inertia => Suite::Inertia,
            SuiteArg::Dynamics => Suite::Dynamics,
            SuiteArg::Disturbance => Suite::Disturbance,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub config_source: String,
    pub version: String,
    pub seed: u64,
    pub controller: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub termination: String,
    pub outputs: Vec<String>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Csv(_) => EXIT_IO,
            Error::Diverged { .. } | Error::PitchSingularity { .. } | Error::SingularDynamics { .. } => EXIT_DIVERGED,
            _ => EXIT_CONFIG,
        };
        Failure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Loads the configuration; the hash covers the exact file bytes, or the
/// printed default configuration when no file is given.
fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<(ScenarioConfig, String, String), Failure> {
    let (text, source) = match path {
        Some(p) => (fs::read_to_string(p).map_err(|e| io_failure(p, e))?, p.display().to_string()),
        None => (FileConfig::default().to_toml(), "<default>".to_string()),
    };
    let file = FileConfig::from_toml(&text).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let mut cfg = file.to_scenario().map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, hex::encode(Sha256::digest(text.as_bytes())), source))
}

fn window_stats(log: &TrajectoryLog, duration: f64) -> Result<(RunStats, RunStats), Failure> {
    let full = run_stats(log, 0.0, duration)?;
    let from = if duration > METRIC_WINDOW_START { METRIC_WINDOW_START } else { 0.0 };
    Ok((run_stats(log, from, duration)?, full))
}

fn write_log(log: &TrajectoryLog, path: &Path) -> Result<(), Failure> {
    let f = fs::File::create(path).map_err(|e| io_failure(path, e))?;
    log.write_csv(std::io::BufWriter::new(f)).map_err(|e| io_failure(path, e))
}

fn termination_text(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::Diverged { t, reason } => format!("diverged at t = {t:.3} s: {reason}"),
    }
}

fn summary_text(window: &RunStats, full: &RunStats, from: f64) -> String {
    let mut s = format!("{:<8}{:>14}{:>14}{:>14}{:>14}\n", "channel", "mean", "max", "rmse", "max(full)");
    for (c, name) in CHANNELS.iter().enumerate() {
        let (w, f) = (window.channels[c], full.channels[c]);
        s += &format!("{:<8}{:>14.6e}{:>14.6e}{:>14.6e}{:>14.6e}\n", name, w.mean, w.max, w.rmse, f.max);
    }
    s + &format!("(statistics over t >= {from} s; last column over the full run)\n")
}

fn cmd_simulate(config: Option<&Path>, out: &Path, controller: Option<ControllerArg>, seed: Option<u64>) -> Result<i32, Failure> {
    let started = unix_now();
    let (mut cfg, hash, source) = load_config(config, seed)?;
    if let Some(c) = controller {
        cfg.controller = c.into();
    }
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let log = run_scenario(&cfg)?;
    let log_path = out.join("log.csv");
    write_log(&log, &log_path)?;
    let mut outputs = vec![log_path.display().to_string()];

    let code = if log.completed() { EXIT_OK } else { EXIT_DIVERGED };
    if let Some(last) = log.records.last() {
        let end = last.t;
        let (window, full) = window_stats(&log, end)?;
        let from = if end > METRIC_WINDOW_START { METRIC_WINDOW_START } else { 0.0 };
        let text = summary_text(&window, &full, from);
        let summary_path = out.join("summary.txt");
        fs::write(&summary_path, &text).map_err(|e| io_failure(&summary_path, e))?;
        outputs.push(summary_path.display().to_string());
        println!("controller: {}", log.controller);
        print!("{text}");
    }
    println!("{}", termination_text(&log.termination));

    let manifest_path = out.join("manifest.json");
    outputs.push(manifest_path.display().to_string());
    let manifest = RunManifest {
        config_sha256: hash,
        config_source: source,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        controller: log.controller.to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        termination: termination_text(&log.termination),
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&manifest_path, json).map_err(|e| io_failure(&manifest_path, e))?;
    if code != EXIT_OK {
        eprintln!("error: {}", termination_text(&log.termination));
    }
    Ok(code)
}

/// Runs the configured scenario under all three controllers in parallel.
pub fn compare(cfg: &ScenarioConfig) -> crate::Result<(ComparisonReport, Vec<TrajectoryLog>)> {
    let logs: Vec<crate::Result<TrajectoryLog>> = std::thread::scope(|s| {
        let handles: Vec<_> = ControllerKind::ALL
            .iter()
            .map(|&kind| {
                let c = ScenarioConfig { controller: kind, ..cfg.clone() };
                s.spawn(move || run_scenario(&c))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let logs = logs.into_iter().collect::<crate::Result<Vec<_>>>()?;
    let from = if cfg.duration > METRIC_WINDOW_START { METRIC_WINDOW_START } else { 0.0 };
    let mut runs = Vec::new();
    for log in &logs {
        if let Termination::Diverged { t, reason } = &log.termination {
            return Err(Error::Diverged { t: *t, reason: format!("{}: {reason}", log.controller) });
        }
        runs.push(run_stats(log, from, cfg.duration)?);
    }
    Ok((ComparisonReport { runs }, logs))
}

fn cmd_compare(config: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> Result<i32, Failure> {
    let (cfg, _, _) = load_config(config, seed)?;
    let (report, logs) = compare(&cfg)?;
    print!("{}", report.to_text());
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let path = dir.join("comparison.csv");
        let f = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
        report.write_csv(f).map_err(|e| io_failure(&path, e))?;
        for log in &logs {
            write_log(log, &dir.join(format!("{}_log.csv", log.controller)))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(suite: Suite) -> i32 {
    let checks = run_suite(&AerialManipulator::reference(), suite);
    let mut ok = true;
    for c in &checks {
        println!("{c}");
        ok &= c.passed();
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if cli.print_default_config {
        print!("{}", FileConfig::default().to_toml());
        return EXIT_OK;
    }
    let result = match &cli.command {
        Some(Command::Simulate { config, out, controller }) => cmd_simulate(config.as_deref(), out, *controller, cli.seed),
        Some(Command::Compare { config, out }) => cmd_compare(config.as_deref(), out.as_deref(), cli.seed),
        Some(Command::Verify { suite }) => Ok(cmd_verify((*suite).into())),
        None => {
            eprintln!("error: a subcommand is required (simulate, compare, verify); see --help");
            Ok(EXIT_USAGE)
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

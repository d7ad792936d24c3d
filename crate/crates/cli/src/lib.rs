//! The `gazelens` command line. Each pipeline stage is a subcommand;
//! `pipeline` runs them all from a flat `key = value` config file.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 on a data error.

pub mod commands;
pub mod data;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Once;

use clap::{error::ErrorKind, CommandFactory, Parser, Subcommand};
use thiserror::Error;

use commands::{
    AnalyzeArgs, ClassifyArgs, ClusterArgs, IngestArgs, SegmentArgs, SimulateArgs, VisualizeArgs,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const THREADS_ENV: &str = "GAZELENS_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "gazelens",
    version,
    about = "Gaze analytics for VR art-encounter sessions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a data directory and report counts.
    Ingest(IngestArgs),
    /// Turn gaze signals into events CSVs.
    Segment(SegmentArgs),
    /// Cluster gaze durations into attention levels.
    Cluster(ClusterArgs),
    /// Walk, elevation, orientation, colour and correlation reports.
    Analyze(AnalyzeArgs),
    /// Train and evaluate a profile classifier.
    Classify(ClassifyArgs),
    /// Attention-annotated stroke metadata.
    Visualize(VisualizeArgs),
    /// Write a synthetic cohort as a data directory.
    Simulate(SimulateArgs),
    /// Run every stage from a config file.
    Pipeline(PipelineArgs),
}

#[derive(clap::Args, Debug, Clone)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error(transparent)]
    Data(#[from] anyhow::Error),
}

/// Runs one command line and returns its exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match try_execute(argv) {
        Ok(()) => EXIT_OK,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

pub fn try_execute<I, T>(argv: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    init_threads()?;
    run(&cli.command)
}

fn init_threads() -> Result<(), CliError> {
    static INIT: Once = Once::new();
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                return Err(CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                )))
            }
        },
        Err(_) => return Ok(()),
    };
    INIT.call_once(|| {
        // Fails only if the global pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    });
    Ok(())
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => commands::ingest(a)?,
        Command::Segment(a) => commands::segment(a)?,
        Command::Cluster(a) => commands::cluster(a)?,
        Command::Analyze(a) => commands::analyze(a)?,
        Command::Classify(a) => commands::classify(a)?,
        Command::Visualize(a) => commands::visualize(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Pipeline(a) => pipeline(&a.config)?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline

/// Stages in run order with their output subdirectory (or file).
const STAGES: [(&str, &str); 6] = [
    ("ingest", "ingest/summary.csv"),
    ("segment", "segment"),
    ("cluster", "cluster"),
    ("analyze", "analyze"),
    ("classify", "classify"),
    ("visualize", "visualize"),
];
const RESERVED_KEYS: [&str; 2] = ["data", "out"];

/// Parses `key = value` lines. `#` starts a comment; keys may use `_` or `-`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key = value", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key {key:?}",
                i + 1
            )));
        }
    }
    Ok(out)
}

/// Long option names of a subcommand, and whether each takes a value.
fn stage_options(stage: &str) -> BTreeMap<String, bool> {
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(stage).expect("stage is a subcommand");
    sub.get_arguments()
        .filter_map(|a| {
            a.get_long()
                .map(|l| (l.to_string(), a.get_action().takes_values()))
        })
        .filter(|(l, _)| !RESERVED_KEYS.contains(&l.as_str()) && l != "help")
        .collect()
}

fn stage_argv(
    stage: &str,
    config: &BTreeMap<String, String>,
    data: &Path,
    out: &Path,
) -> Result<Vec<OsString>, CliError> {
    let mut argv: Vec<OsString> = vec!["gazelens".into(), stage.into()];
    argv.extend([
        "--data".into(),
        data.as_os_str().to_owned(),
        "--out".into(),
        out.as_os_str().to_owned(),
    ]);
    for (name, takes_value) in stage_options(stage) {
        let Some(value) = config.get(&name) else {
            continue;
        };
        if takes_value {
            argv.push(format!("--{name}").into());
            argv.push(value.into());
        } else {
            match value.as_str() {
                "true" => argv.push(format!("--{name}").into()),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "config key {name}: expected true or false, got {other:?}"
                    )))
                }
            }
        }
    }
    Ok(argv)
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = Path::new(value);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Runs simulate (when the config names no `data`), then every stage, each
/// into its own subdirectory of `out`. Other keys are forwarded to every
/// stage that has an option of that name.
pub fn pipeline(config_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", config_path.display())))?;
    let config = parse_config(&text)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out = resolve(
        base,
        config
            .get("out")
            .ok_or_else(|| CliError::Usage("config: missing required key \"out\"".into()))?,
    );

    let mut known: BTreeSet<String> = RESERVED_KEYS.iter().map(|s| s.to_string()).collect();
    for stage in STAGES.iter().map(|(s, _)| *s).chain(["simulate"]) {
        known.extend(stage_options(stage).into_keys());
    }
    if let Some(unknown) = config.keys().find(|k| !known.contains(*k)) {
        return Err(CliError::Usage(format!("config: unknown key {unknown:?}")));
    }

    let data = match config.get("data") {
        Some(d) => resolve(base, d),
        None => {
            let data = out.join("data");
            let mut argv: Vec<OsString> = vec!["gazelens".into(), "simulate".into()];
            argv.extend(["--out".into(), data.as_os_str().to_owned()]);
            for (name, takes_value) in stage_options("simulate") {
                if let Some(v) = config.get(&name).filter(|_| takes_value) {
                    argv.push(format!("--{name}").into());
                    argv.push(v.into());
                }
            }
            run(&Cli::try_parse_from(argv)?.command)?;
            data
        }
    };

    for (stage, target) in STAGES {
        let argv = stage_argv(stage, &config, &data, &out.join(target))?;
        run(&Cli::try_parse_from(argv)?.command)?;
    }
    Ok(())
}

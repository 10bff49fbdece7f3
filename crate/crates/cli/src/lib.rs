//! Command-line front end of the ionstrobe simulator.
//!
//! Every command reads one TOML run configuration and writes plain-text
//! tables ending in a footer with the config hash, the seed and the
//! effective configuration.

pub mod commands;
pub mod config;
pub mod model;
pub mod output;
pub mod tables_io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::output::Artifact;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] ionstrobe_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
    /// Some output was produced before the failure.
    #[error("{message}")]
    Partial { artifacts: Vec<Artifact>, message: String },
}

impl CliError {
    pub fn config(key: &str, reason: &str) -> Self {
        CliError::Config(format!("`{key}`: {reason}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Partial { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ionstrobe", version, about = "Stroboscopic phase-space scans of a trapped-ion mode")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Primary output file; secondary files are written next to it.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Overrides `detection.base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fringe scan over the analysis phase and one outer variable.
    RamseyScan(Common),
    /// Probe map of a static ion across a travelling-wave pattern, with a 2D fit.
    PatternScan(Common),
    /// Decode <X> and |<P>| along a ring of coherent-state phases.
    TracePhaseSpace(Common),
    /// Squeezed-state fringes and the train's back-action on <n>.
    SqueezeScan(Common),
    /// Tune phase step and Rabi scale for a balanced train.
    CalibrateTrain(Common),
    /// Build phase-space decode tables.
    BuildTables(Common),
    /// Phase-stability statistics of simulated noise traces.
    Stability(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::RamseyScan(c)
            | Command::PatternScan(c)
            | Command::TracePhaseSpace(c)
            | Command::SqueezeScan(c)
            | Command::CalibrateTrain(c)
            | Command::BuildTables(c)
            | Command::Stability(c) => c,
        }
    }
}

fn write_artifacts(artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for a in artifacts {
        if let Some(dir) = a.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(&a.path, &a.content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", a.path.display())))?;
        paths.push(a.path.clone());
    }
    Ok(paths)
}

/// Runs one command on an already loaded config.
pub fn execute(command: &Command, cfg: &RunConfig, base_dir: &Path) -> Result<Vec<Artifact>, CliError> {
    let ctx = Context {
        cfg,
        base_dir,
        out: &command.common().out,
    };
    match command {
        Command::RamseyScan(_) => commands::ramsey_scan(&ctx),
        Command::PatternScan(_) => commands::pattern_scan(&ctx),
        Command::TracePhaseSpace(_) => commands::trace_phase_space(&ctx),
        Command::SqueezeScan(_) => commands::squeeze_scan(&ctx),
        Command::CalibrateTrain(_) => commands::calibrate_train(&ctx),
        Command::BuildTables(_) => commands::build_tables_cmd(&ctx),
        Command::Stability(_) => commands::stability(&ctx),
    }
}

/// Loads the config, runs the command and writes its files.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let common = cli.command.common();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("`--threads` must be >= 1".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.detection.base_seed = seed;
    }
    let base_dir = common.config.parent().unwrap_or(Path::new("."));
    match execute(&cli.command, &cfg, base_dir) {
        Ok(artifacts) => write_artifacts(&artifacts),
        Err(CliError::Partial { artifacts, message }) => {
            write_artifacts(&artifacts)?;
            Err(CliError::Partial {
                artifacts: Vec::new(),
                message,
            })
        }
        Err(e) => Err(e),
    }
}

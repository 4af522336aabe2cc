//! `synthsearch` command-line entry point.

mod commands;
mod config;
mod tables;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, RunConfig, Settings, MANIFEST};

/// Example-subset search for synthetic-data model improvement.
#[derive(Debug, Parser)]
#[command(name = "synthsearch", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory; every artifact and the run `manifest` land here.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// `key = value` config file, applied over `OUT/manifest`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Generator backend: mock, mock-empty, eda or llm.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Attempts per setting.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Worker threads (defaults to the logical CPU count).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a labeled TSV corpus and write a stratified split.
    Ingest {
        /// Corpus file (`id<TAB>label<TAB>text` with a header).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Train, optimization-test and holdout fractions, e.g. `0.6,0.2,0.2`.
        #[arg(long)]
        ratios: Option<String>,
    },
    /// Train the original model and score it on optimization-test and holdout.
    Baseline,
    /// Run every (strategy, metric, class) setting and build the knowledge map.
    Sweep {
        /// Comma-separated subset of SW,HSW,GA.
        #[arg(long)]
        strategies: Option<String>,
        /// Comma-separated subset of CR,CBA,OBA,OF1.
        #[arg(long)]
        metrics: Option<String>,
        /// Comma-separated example classes (default: all).
        #[arg(long)]
        classes: Option<String>,
    },
    /// Render the knowledge map as Δ grids, best-strategy summary and cross-impact tables.
    Report {
        /// Map file (default: OUT/map.tsv).
        #[arg(long)]
        map: Option<PathBuf>,
        /// Tie band in percentage points.
        #[arg(long)]
        band: Option<f64>,
    },
    /// Multi-phase, multi-objective improvement driven by the knowledge map.
    Improve {
        /// Objectives TSV: `metric class weight min_threshold` per row.
        #[arg(long)]
        objectives: Option<PathBuf>,
        /// Map file (default: OUT/map.tsv when present).
        #[arg(long, conflicts_with = "no_map")]
        map: Option<PathBuf>,
        /// Ignore any map and sweep first.
        #[arg(long)]
        no_map: bool,
        /// Use a map built on a different dataset as advisory.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        phases: Option<usize>,
    },
    /// Write projected, colored points for one class (the scatter plots behind window search).
    DumpProjection {
        #[arg(long)]
        class: String,
        /// Dimension pair `A,B` (default: every configured projection).
        #[arg(long)]
        projection: Option<String>,
    },
}

/// A failed command: usage/config problems exit 2, everything else 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut s = Settings::default();
    let manifest = cli.common.out.join(MANIFEST);
    if manifest.is_file() {
        s.apply_file(&manifest)?;
    }
    if let Some(path) = &cli.common.config {
        s.apply_file(path)?;
    }
    for kv in &cli.common.set {
        let Some((k, v)) = kv.split_once('=') else {
            return usage(format!("--set expects KEY=VALUE, got {kv:?}"));
        };
        s.set(k, v)?;
    }
    let mut flag = |key: &str, v: Option<String>| v.map_or(Ok(()), |v| s.set(key, &v));
    flag("seed", cli.common.seed.map(|v| v.to_string()))?;
    flag("backend", cli.common.backend.clone())?;
    flag("budget", cli.common.budget.map(|v| v.to_string()))?;
    match &cli.command {
        Command::Ingest { dataset, ratios } => {
            flag("dataset", dataset.as_ref().map(|p| p.display().to_string()))?;
            flag("ratios", ratios.clone())?;
        }
        Command::Sweep {
            strategies,
            metrics,
            classes,
        } => {
            flag("strategies", strategies.clone())?;
            flag("metrics", metrics.clone())?;
            flag("classes", classes.clone())?;
        }
        Command::Report { band, .. } => flag("band", band.map(|v| v.to_string()))?,
        Command::Improve { objectives, phases, .. } => {
            flag("objectives", objectives.as_ref().map(|p| p.display().to_string()))?;
            flag("phases", phases.map(|v| v.to_string()))?;
        }
        Command::Baseline | Command::DumpProjection { .. } => {}
    }
    Ok(RunConfig::from_settings(s)?)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = resolve(cli)?;
    if let Some(n) = cli.common.jobs {
        if n == 0 {
            return usage("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    let out = &cli.common.out;
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(anyhow::anyhow!("{}: {e}", out.display())))?;
    std::fs::write(out.join(MANIFEST), cfg.settings.to_manifest()).map_err(|e| Failure::Runtime(e.into()))?;
    match &cli.command {
        Command::Ingest { .. } => commands::ingest(&cfg, out),
        Command::Baseline => commands::baseline(&cfg, out),
        Command::Sweep { .. } => commands::sweep(&cfg, out),
        Command::Report { map, .. } => commands::report(&cfg, out, map.as_deref()),
        Command::Improve { map, no_map, force, .. } => commands::improve(&cfg, out, map.as_deref(), *no_map, *force),
        Command::DumpProjection { class, projection } => commands::dump_projection(&cfg, out, class, projection.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_target(false).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

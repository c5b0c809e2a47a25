//! Command-line front end: `simulate`, `train`, `evaluate`, `extrapolate`
//! and `report`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O or file-format
//! error, 4 numeric failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use commands::{
    cmd_evaluate, cmd_extrapolate, cmd_report, cmd_simulate, cmd_train, log_path, EvaluateSummary,
    ExtrapolateSummary, RecordSelection, TrainSummary,
};
pub use config::{Preset, RunConfig};

use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "aperture-forge", version, about = "Neural aperture extrapolation for MIMO radar")]
pub struct Cli {
    /// JSON config; keys mirror the RunConfig field names and override the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Preset::Paper)]
    pub preset: Preset,
    /// Master seed for simulation, initialisation and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate scenes into an ARDS dataset with a truth sidecar.
    Simulate {
        #[arg(long)]
        count: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train the extrapolator; writes the model and `<model>.log.csv`.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Score the large, small and artificial apertures; writes CSV, SVG and summary.json.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Without a model only the large and small apertures are scored.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RecordSelection::Test)]
        records: RecordSelection,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Extend small-array snapshots (ARDS dataset or radar cube) to the full aperture.
    Extrapolate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Re-render CSVs and SVGs from an evaluation summary.json.
    Report {
        #[arg(long)]
        summary: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path, cli.preset)?,
        None => RunConfig::preset(cli.preset),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
        cfg.train.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| Error::Config(format!("no {name} given (flag or config)")))
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summaries serialize"));
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Simulate { count, out } => print(&cmd_simulate(&cfg, count, &out)?),
        Command::Train { dataset, out } => {
            let dataset = required(dataset, &cfg.dataset, "dataset")?;
            print(&cmd_train(&cfg, &dataset, &out)?)
        }
        Command::Evaluate {
            dataset,
            model,
            records,
            out,
        } => {
            let dataset = required(dataset, &cfg.dataset, "dataset")?;
            let model = model.or_else(|| cfg.model.clone());
            print(&cmd_evaluate(&cfg, &dataset, model.as_deref(), records, &out)?)
        }
        Command::Extrapolate { input, model, out } => {
            let model = required(model, &cfg.model, "model")?;
            print(&cmd_extrapolate(&cfg, &input, &model, &out)?)
        }
        Command::Report { summary, out } => print(&cmd_report(&summary, &out)?),
    }
    Ok(())
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let jobs = cli.jobs;
    let outcome = match jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| execute(cli))),
        None => execute(cli),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

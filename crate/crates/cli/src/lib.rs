//! The `heatcast` command line: argument parsing, experiment configuration
//! and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::PredictArgs;
use crate::config::{DatasetRef, ExperimentConfig, ModelChoice};
use crate::error::Result;

pub use crate::error::CliError;

/// Indoor temperature forecasting for district-heated buildings.
#[derive(Debug, Parser)]
#[command(name = "heatcast", version)]
struct Cli {
    /// Experiment TOML; missing keys fall back to built-in defaults.
    #[arg(long, global = true, env = "HEATCAST_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "HEATCAST_OUT_DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "HEATCAST_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

/// Overrides the configured datasets with a single building.
#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, requires = "site")]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    site: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic buildings with known parameters.
    Simulate {
        #[arg(long)]
        buildings: Option<usize>,
        #[arg(long)]
        hours: Option<usize>,
    },
    /// Fit one model family on every dataset.
    Train {
        #[arg(long, value_enum)]
        model: ModelChoice,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Forecast from a single origin with a saved checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// RFC 3339; defaults to the last origin with enough data.
        #[arg(long)]
        origin: Option<String>,
        #[arg(long, default_value_t = 48)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Score every configured model on the held-out test origins.
    Evaluate {
        /// Where to look for checkpoints; missing ones are trained in-process.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',')]
        models: Vec<ModelChoice>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Retrain the BNN under several prior variances.
    PriorSweep {
        #[arg(long, value_delimiter = ',')]
        priors: Vec<f64>,
        #[command(flatten)]
        data: DataArgs,
    },
}

impl DataArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let (Some(csv), Some(site)) = (&self.data, &self.site) {
            cfg.datasets = vec![DatasetRef { csv: csv.clone(), site: site.clone() }];
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Simulate { buildings, hours } => {
            if let Some(b) = buildings {
                cfg.simulate.buildings = *b;
            }
            if let Some(h) = hours {
                cfg.simulate.hours = *h;
            }
        }
        Command::Train { model, epochs, data } => {
            data.apply(&mut cfg);
            if let (Some(e), Some(kind)) = (epochs, model.neural()) {
                match kind {
                    heatcast_dl::ModelKind::LstmMlp => cfg.train.lstm_mlp.epochs = *e,
                    heatcast_dl::ModelKind::LstmBnn => cfg.train.lstm_bnn.epochs = *e,
                }
            }
        }
        Command::Predict { data, .. } => data.apply(&mut cfg),
        Command::Evaluate { models, data, .. } => {
            data.apply(&mut cfg);
            if !models.is_empty() {
                cfg.eval.models = models.clone();
            }
        }
        Command::PriorSweep { priors, data } => {
            data.apply(&mut cfg);
            if !priors.is_empty() {
                cfg.sweep.priors = priors.clone();
            }
        }
    }
    let cfg = cfg.resolve()?;
    match cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Train { model, .. } => commands::train(&cfg, model),
        Command::Predict { checkpoint, origin, horizon, samples, .. } => {
            commands::predict(&cfg, &PredictArgs { checkpoint, origin, horizon, samples })
        }
        Command::Evaluate { checkpoints, .. } => commands::evaluate(&cfg, checkpoints.as_deref()),
        Command::PriorSweep { .. } => commands::prior_sweep_cmd(&cfg),
    }
}

/// Parse `args` (program name first), run the command and return the
/// process exit code. Errors are reported on stderr.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("heatcast: {e}");
            e.exit_code() as u8
        }
    }
}

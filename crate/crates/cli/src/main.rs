mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CommandError;
use crate::config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "concentration",
    version,
    about = "Concentration-level estimation from keypoint traces"
)]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: `out_dir` from the config, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract windowed standard-deviation features from trace files.
    Preprocess {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Cross-validate and train the recognition network on a feature file.
    Train {
        features: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Produce recognition levels for a trace.
    Recognize {
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Kalman-filter a recognition file into estimation levels.
    Estimate { recognition: PathBuf },
    /// Fit the two-Gaussian curve to the estimation levels of a series file.
    Fit { series: PathBuf },
    /// Write labeled synthetic traces.
    Synth {
        #[arg(long)]
        traces_per_class: Option<usize>,
    },
    /// Features, recognition, estimation and fit for one trace.
    Run {
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let cfg = PipelineConfig::load(cli.config.as_deref())
        .map_err(CommandError::input)?
        .with_seed(cli.seed);
    let out_dir = cli
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = commands::Context { cfg, out_dir };
    ctx.cfg.validate().map_err(CommandError::from)?;

    match cli.command {
        Command::Preprocess { traces } => commands::preprocess(&ctx, &traces),
        Command::Train { features, folds } => commands::train(&ctx, &features, folds),
        Command::Recognize { trace, model } => commands::recognize(&ctx, &trace, &model),
        Command::Estimate { recognition } => commands::estimate(&ctx, &recognition),
        Command::Fit { series } => commands::fit(&ctx, &series),
        Command::Synth { traces_per_class } => commands::synth(&ctx, traces_per_class),
        Command::Run { trace, model } => commands::run(&ctx, &trace, &model),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code)
        }
    }
}

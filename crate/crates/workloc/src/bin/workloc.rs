//! Command-line driver for the simulate / estimate / train / evaluate /
//! compare pipelines. All heavy lifting lives in the library; this binary
//! parses flags, loads JSON configs, and maps errors to exit codes
//! (0 success, 2 validation error, 3 numerical failure, 4 finished without
//! converging but output written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use workloc::error::Error;
use workloc::neural::{FeatureMode, TrainConfig};
use workloc::nested_logit::NlSettings;
use workloc::pipeline::{
    cmd_compare, cmd_estimate_nl, cmd_evaluate, cmd_simulate, cmd_train_dnn,
    DEFAULT_SPLIT_FRACTION,
};
use workloc::synthgen::SimConfig;

#[derive(Parser)]
#[command(
    name = "workloc",
    about = "Workplace location choice models: synthetic data, nested-logit and neural estimation, and model comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Car,
    All,
}

impl From<ModeArg> for FeatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Car => FeatureMode::Car,
            ModeArg::All => FeatureMode::All,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config JSON; defaults cover a 10x10 city with the survey
    /// marginals and an nl oracle.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the dataset files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset directory (zones.csv, individuals.csv, accessibility.bin).
    #[arg(long)]
    data: PathBuf,
    /// Output model JSON path; a parameter table CSV lands next to it.
    #[arg(long)]
    out: PathBuf,
    /// Optional estimator settings JSON (memory, tolerance, max_iterations).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train/validation split seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Train fraction of the split.
    #[arg(long, default_value_t = DEFAULT_SPLIT_FRACTION)]
    split: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output model JSON path; an epoch history CSV lands next to it.
    #[arg(long)]
    out: PathBuf,
    /// Optional training config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature set: car (9 inputs) or all (14 inputs).
    #[arg(long, value_enum, default_value_t = ModeArg::Car)]
    mode: ModeArg,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Seed for initialization, shuffling, and the split.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SPLIT_FRACTION)]
    split: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Report output directory.
    #[arg(long)]
    out: PathBuf,
    /// Sampling seed for the model-side choice draws.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Model JSON file.
    model: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Two or more model JSON files.
    #[arg(required = true, num_args = 2..)]
    models: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic city, population, accessibility, and choices.
    Simulate(SimulateArgs),
    /// Estimate the nested-logit model on a dataset.
    EstimateNl(EstimateArgs),
    /// Train a neural choice model on a dataset.
    TrainDnn(TrainArgs),
    /// Evaluate one model file: tables, KS tests, distance histograms.
    Evaluate(EvaluateArgs),
    /// Compare two or more model files side by side.
    Compare(CompareArgs),
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate(args) => {
            let config: SimConfig = match &args.config {
                Some(path) => load_json(path)?,
                None => SimConfig::default(),
            };
            let prov = cmd_simulate(&config, &args.out, args.seed)?;
            println!(
                "wrote dataset (fingerprint {}) to {}",
                prov.dataset_fingerprint,
                args.out.display()
            );
            Ok(0)
        }
        Command::EstimateNl(args) => {
            let settings: NlSettings = match &args.config {
                Some(path) => load_json(path)?,
                None => NlSettings::default(),
            };
            let out = cmd_estimate_nl(&args.data, &args.out, &settings, args.split, args.seed)?;
            println!(
                "ll_train {:.4}  ll_validation {:.4}  converged {}  iterations {}",
                out.result.ll_final, out.ll_validation, out.result.converged, out.result.iterations
            );
            println!("model: {}", out.model_path.display());
            println!("table: {}", out.table_path.display());
            if out.result.converged {
                Ok(0)
            } else {
                eprintln!("estimation did not converge; outputs were still written");
                Ok(4)
            }
        }
        Command::TrainDnn(args) => {
            let mut config: TrainConfig = match &args.config {
                Some(path) => load_json(path)?,
                None => TrainConfig::default(),
            };
            if let Some(layers) = args.layers {
                config.hidden_sizes = layers;
            }
            if let Some(lr) = args.lr {
                config.learning_rate = lr;
            }
            if let Some(epochs) = args.epochs {
                config.epochs = epochs;
            }
            if let Some(batch) = args.batch {
                config.batch_size = batch;
            }
            config.seed = args.seed;
            let out = cmd_train_dnn(
                &args.data,
                args.mode.into(),
                &config,
                &args.out,
                args.split,
                args.seed,
            )?;
            println!(
                "final ll_train {:.4}  ll_validation {:.4}",
                out.ll_train_final, out.ll_val_final
            );
            println!("model: {}", out.model_path.display());
            println!("history: {}", out.history_path.display());
            Ok(0)
        }
        Command::Evaluate(args) => {
            let report = cmd_evaluate(&args.data, &args.model, &args.out, args.seed)?;
            println!("report: {}", report.manifest_path.display());
            Ok(0)
        }
        Command::Compare(args) => {
            let report = cmd_compare(&args.data, &args.models, &args.out, args.seed)?;
            println!("report: {}", report.manifest_path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

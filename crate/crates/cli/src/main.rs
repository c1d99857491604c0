//! `avfuse`: audio-image extraction, synthetic data, training, evaluation
//! and inspection from the command line.
//!
//! Exit status is 0 on success, 2 for unreadable or malformed input and 3
//! for configuration errors.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use commands::{AttentionArgs, EvalArgs, ExtractArgs, FlopsArgs, SynthArgs, TrainArgs};
use failure::CliResult;

#[derive(Debug, Parser)]
#[command(name = "avfuse", version, about = "Audio-image and video transformer fusion")]
struct Cli {
    /// Seed for every random choice (synth data, initialization, shuffling).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat TOML file whose keys are long flag names; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render audio-image representations of WAV files as PNGs.
    Extract(ExtractArgs),
    /// Generate a seeded synthetic audio/video dataset.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus metrics log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Export one attention matrix as CSV and PNG.
    Attention(AttentionArgs),
    /// Count encoder multiply-accumulates across sequence lengths.
    Flops(FlopsArgs),
}

fn resolve<T: Clone + Serialize + DeserializeOwned>(cli: &Cli, name: &str, args: &T) -> CliResult<(Option<u64>, T)> {
    let (seed, args) = match &cli.config {
        None => (cli.seed, args.clone()),
        Some(path) => {
            let (file_seed, table) = config::load_file(path)?;
            (cli.seed.or(file_seed), config::merge(args, table, path)?)
        }
    };
    eprint!("{}", config::describe(name, seed, &args));
    Ok((seed, args))
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Extract(a) => {
            let (_, a) = resolve(cli, "extract", a)?;
            commands::extract(&a)
        }
        Command::Synth(a) => {
            let (seed, a) = resolve(cli, "synth", a)?;
            commands::synth(seed, &a)
        }
        Command::Train(a) => {
            let (seed, a) = resolve(cli, "train", a)?;
            commands::train(seed, &a)
        }
        Command::Eval(a) => {
            let (_, a) = resolve(cli, "eval", a)?;
            commands::eval(&a)
        }
        Command::Attention(a) => {
            let (_, a) = resolve(cli, "attention", a)?;
            commands::attention(&a)
        }
        Command::Flops(a) => {
            let (_, a) = resolve(cli, "flops", a)?;
            commands::flops(&a)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

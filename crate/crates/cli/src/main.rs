use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hetspec_cli::commands::{self, CliError};
use hetspec_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "hetspec", version, about = "Spectral augmentation for heterogeneous graph contrastive learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// graph directory (defaults to a generated synthetic graph)
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph directory
    Synth(Common),
    /// Learn and checkpoint augmentation schemes
    Augment(Common),
    /// Train the encoder and write embeddings
    Train(Common),
    /// Score saved embeddings with the linear probe
    Eval(Common),
    /// Run the three-arm ablation
    Ablate(Common),
    /// Write the Laplacian spectrum of every meta-path view
    Spectrum(Common),
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(g) = &common.graph {
        cfg.graph = Some(g.clone());
    }
    Ok(cfg.finish()?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(c) => commands::synth(&resolve(c)?),
        Command::Augment(c) => commands::augment(&resolve(c)?),
        Command::Train(c) => commands::train(&resolve(c)?),
        Command::Eval(c) => commands::eval(&resolve(c)?),
        Command::Ablate(c) => commands::ablate(&resolve(c)?),
        Command::Spectrum(c) => commands::spectrum(&resolve(c)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

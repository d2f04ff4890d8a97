//! `xemo`: prepare data, train the emotion models, score them and explain their predictions.

mod config;
mod explain;
mod prepare;
mod results;
mod train;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xemo_core::explain::PairMode;
use xemo_core::train::Scheme;

use crate::config::Overrides;

/// Errors the CLI raises itself, mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit code 1.
    Usage(String),
    /// Bad or missing input data or configuration: exit code 2.
    Validation(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Parser)]
#[command(name = "xemo", version, about = "Explainable music emotion recognition through mid-level features")]
struct Cli {
    /// Experiment config (defaults to ./xemo.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set training.lr=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel training runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate inputs, cache spectrograms and write split manifests.
    Prepare,
    /// Run the multi-run protocol for one scheme.
    Train {
        /// a2e, a2mid2e, joint, a2mid, a2mid-plus or mid2e (defaults to the config's scheme).
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
    },
    /// Score a checkpoint on its test songs or on given songs.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',')]
        songs: Vec<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Cost of explainability: baseline minus candidate, per column.
    Coe {
        baseline: PathBuf,
        candidate: PathBuf,
        #[arg(long)]
        baseline_row: Option<String>,
        #[arg(long)]
        candidate_row: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Explain emotion predictions through mid-level effects.
    Explain {
        /// A joint or a2mid2e checkpoint; without one, a linear model is fitted on the annotations.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        songs: Vec<String>,
        /// Also pick a contrasting song pair: `paper` or `intent`.
        #[arg(long, value_parser = parse_pair_mode)]
        pair_mode: Option<PairMode>,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Collect trained schemes' results into summary tables.
    Report {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: xemo_core::Error| e.to_string())
}

fn parse_pair_mode(s: &str) -> Result<PairMode, String> {
    s.parse().map_err(|e: xemo_core::Error| e.to_string())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let ov = Overrides { sets: cli.sets, runs: cli.runs, seed: cli.seed, jobs: cli.jobs };
    match cli.command {
        Command::Coe { baseline, candidate, baseline_row, candidate_row, format, output } => {
            results::coe(&baseline, &candidate, baseline_row.as_deref(), candidate_row.as_deref(), format, output.as_deref())
        }
        command => {
            let loaded = config::load(cli.config.as_deref(), &ov)?;
            match command {
                Command::Prepare => prepare::run(&loaded),
                Command::Train { scheme } => {
                    let scheme = match scheme {
                        Some(s) => s,
                        None => loaded.cfg.scheme.parse().map_err(|e: xemo_core::Error| CliError::Validation(e.to_string()))?,
                    };
                    train::run(&loaded, scheme)
                }
                Command::Eval { checkpoint, songs, format } => results::eval(&loaded, &checkpoint, &songs, format),
                Command::Explain { checkpoint, songs, pair_mode, top_k, format } => explain::run(
                    &loaded,
                    &explain::Request { checkpoint: checkpoint.as_deref(), songs: &songs, pair_mode, top_k, format },
                ),
                Command::Report { format } => results::report(&loaded, format),
                Command::Coe { .. } => unreachable!(),
            }
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<CliError>() {
        return match e {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
        };
    }
    match err.downcast_ref::<xemo_core::Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

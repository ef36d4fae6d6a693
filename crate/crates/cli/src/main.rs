//! `semaxes`: semantic feature directions in embedding matrices.

mod commands;
mod config;
mod error;
mod manifest;
mod pipeline;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{ExportFormat, InterveneArgs};
use crate::config::{FileConfig, Overrides, RunConfig};
use crate::error::{CliError, CliResult, EXIT_CONFIG, EXIT_INTERNAL};
use crate::manifest::Manifest;

#[derive(Parser)]
#[command(name = "semaxes", version, about = "Semantic feature directions in token-embedding matrices")]
struct Cli {
    /// TOML configuration file; flags take precedence over its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an embedding file to the binary container (or back to text).
    Import {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long = "out", value_name = "FILE")]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "semx")]
        to: ExportFormat,
    },
    /// Extract one direction per lexicon feature.
    Axes(Overrides),
    /// Project words onto feature directions.
    Project {
        #[command(flatten)]
        flags: Overrides,
        /// Directions file; extracted from --lexicon when omitted.
        #[arg(long, value_name = "FILE")]
        directions: Option<PathBuf>,
    },
    /// Feature correlation and cosine matrices.
    Matrices {
        #[command(flatten)]
        flags: Overrides,
        #[arg(long, value_name = "FILE")]
        projections: PathBuf,
        #[arg(long, value_name = "FILE")]
        directions: Option<PathBuf>,
    },
    /// Principal components of a projection table.
    Pca {
        #[command(flatten)]
        flags: Overrides,
        #[arg(long, value_name = "FILE")]
        projections: PathBuf,
    },
    /// Correlate projections with human ratings, plain and whitened.
    SurveyCompare(Overrides),
    /// Steer one token along a feature direction.
    Intervene {
        #[command(flatten)]
        flags: Overrides,
        #[arg(long, value_name = "FILE")]
        directions: Option<PathBuf>,
        #[arg(long)]
        word: String,
        #[arg(long)]
        feature: String,
        /// Push towards the negative pole.
        #[arg(long)]
        negative: bool,
    },
    /// Antonym-association probes and steering experiment against a scoring service.
    Probe {
        #[command(flatten)]
        flags: Overrides,
        /// Only probe the unmodified vocabulary.
        #[arg(long)]
        baseline_only: bool,
    },
    /// Predicted off-target projection changes from embedding geometry.
    Offtarget {
        #[command(flatten)]
        flags: Overrides,
        #[arg(long, value_name = "FILE")]
        directions: Option<PathBuf>,
    },
    /// Run extraction, projection, matrices, PCA, survey comparison and
    /// off-target prediction in one go.
    Pipeline(Overrides),
}

fn resolve(config: &Option<PathBuf>, flags: &Overrides) -> CliResult<RunConfig> {
    let file = config.as_deref().map(FileConfig::load).transpose()?;
    Ok(RunConfig::resolve(file, flags))
}

fn run(cli: Cli) -> CliResult<Option<Manifest>> {
    let cfg = |flags: &Overrides| resolve(&cli.config, flags);
    let manifest = match &cli.command {
        Command::Import { input, output, to } => {
            commands::import(input, output, *to)?;
            return Ok(None);
        }
        Command::Axes(flags) => commands::axes(&cfg(flags)?)?,
        Command::Project { flags, directions } => commands::project(&cfg(flags)?, directions.clone())?,
        Command::Matrices { flags, projections, directions } => {
            commands::matrices(&cfg(flags)?, projections.clone(), directions.clone())?
        }
        Command::Pca { flags, projections } => commands::pca(&cfg(flags)?, projections.clone())?,
        Command::SurveyCompare(flags) => commands::survey_compare(&cfg(flags)?)?,
        Command::Intervene { flags, directions, word, feature, negative } => commands::intervene_cmd(
            &cfg(flags)?,
            InterveneArgs { directions: directions.clone(), word: word.clone(), feature: feature.clone(), negative: *negative },
        )?,
        Command::Probe { flags, baseline_only } => commands::probe(&cfg(flags)?, *baseline_only)?,
        Command::Offtarget { flags, directions } => commands::offtarget(&cfg(flags)?, directions.clone())?,
        Command::Pipeline(flags) => pipeline::run(&cfg(flags)?)?,
    };
    Ok(Some(manifest))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli)).unwrap_or_else(|_| Err(CliError::Internal("panic".into())));
    match outcome {
        Ok(Some(m)) => {
            let files: usize = m.artifacts.iter().map(|a| a.files.len()).sum();
            println!("{}: {} artifacts ({} files)", m.command, m.artifacts.len(), files);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(if (0..=255).contains(&code) { code as u8 } else { EXIT_INTERNAL as u8 })
        }
    }
}

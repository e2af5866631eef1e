use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geomgt_cli::{run_stage, CliError, CliResult, PipelineConfig, Stage};

/// Multi-Gaussian transform simulation pipeline.
#[derive(Debug, Parser)]
#[command(name = "geomgt", version)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Stage to run, as an alternative to a subcommand.
    #[arg(long)]
    stage: Option<String>,
    /// Base seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count override.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic sample table.
    Synth,
    /// Compute declustering weights.
    Decluster,
    /// Fit the multi-Gaussian transform.
    FitTransform,
    /// Fit MAF on the factors.
    Maf,
    /// Experimental variograms and model fitting.
    Vario,
    /// Conditional turning-bands simulation.
    Simulate,
    /// Map realizations back to original units.
    BackTransform,
    /// Validation report.
    Validate,
    /// Every stage from decluster to validate.
    All,
}

impl Command {
    fn stage(&self) -> Stage {
        match self {
            Command::Synth => Stage::Synth,
            Command::Decluster => Stage::Decluster,
            Command::FitTransform => Stage::FitTransform,
            Command::Maf => Stage::Maf,
            Command::Vario => Stage::Vario,
            Command::Simulate => Stage::Simulate,
            Command::BackTransform => Stage::BackTransform,
            Command::Validate => Stage::Validate,
            Command::All => Stage::All,
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let stage = match (&cli.command, &cli.stage) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either a subcommand or --stage, not both".into())),
        (Some(c), None) => c.stage(),
        (None, Some(s)) => s.parse()?,
        (None, None) => return Err(CliError::Config("no stage given".into())),
    };
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = PipelineConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(out) = cli.out {
        config.output = out;
    }
    config.validate()?;
    run_stage(&config, stage)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

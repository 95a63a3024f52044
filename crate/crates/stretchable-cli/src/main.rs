use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use stretchable_cli::config::{PipelineConfig, StageArgs};
use stretchable_cli::stages;

/// Corpus analysis for stretched words.
#[derive(Debug, Parser)]
#[command(name = "stretchable", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a corpus for candidate stretched tokens.
    Extract(StageArgs),
    /// Distill candidate tokens to kernels and merge them.
    Distill(StageArgs),
    /// Match the corpus against kernel patterns.
    Match(StageArgs),
    /// Rank kernels and compute balance and stretch metrics.
    Analyze(StageArgs),
    /// Render spelling trees for two-letter kernels.
    Tree(StageArgs),
    /// Assemble a diagnostic report for one kernel.
    Diagnose(StageArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // Ignores a failed print: stdout may be closed.
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let run = |args: StageArgs, stage: fn(&_) -> Result<(), stages::CliError>| {
        PipelineConfig::resolve(&args)
            .map_err(Into::into)
            .and_then(|cfg| stage(&cfg))
    };
    let outcome = match cli.command {
        Command::Extract(args) => run(args, stages::run_extract),
        Command::Distill(args) => run(args, stages::run_distill),
        Command::Match(args) => run(args, stages::run_match),
        Command::Analyze(args) => run(args, stages::run_analyze),
        Command::Tree(args) => run(args, stages::run_tree),
        Command::Diagnose(args) => run(args, stages::run_diagnose),
    };
    if let Err(err) = outcome {
        eprintln!("{}", serde_json::json!({ "error": err.to_string() }));
        std::process::exit(2);
    }
}

//! `qa-eval`: batch QA evaluation from the command line.
//!
//! Subcommands mirror the pipeline stages: `evaluate` scores a dataset into a
//! CSV matrix, `analyze` computes correlation/delta/histogram reports against
//! the human column, `classify` assigns answer types, and `route` grades each
//! record with the metric configured for its type.

mod commands;
mod report;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "qa-eval",
    version,
    about = "Batch QA evaluation: lexical metrics, human-agreement statistics, and type-routed grading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a dataset with the metric suite and write the score matrix
    Evaluate(commands::EvaluateArgs),
    /// Correlations, mean score deltas, and histograms against human scores
    Analyze(commands::AnalyzeArgs),
    /// Assign an answer type to each record and report label agreement
    Classify(commands::ClassifyArgs),
    /// Route each record to its per-type metric and score it
    Route(commands::RouteArgs),
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Evaluate(args) => commands::cmd_evaluate(&args),
        Command::Analyze(args) => commands::cmd_analyze(&args),
        Command::Classify(args) => commands::cmd_classify(&args),
        Command::Route(args) => commands::cmd_route(&args),
    }
}

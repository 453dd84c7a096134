mod commands;
mod config;
mod error;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use crate::config::Settings;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "comma", version, about = "Motivation, emotion and action modelling toolkit")]
struct Cli {
    /// Default root for artifacts.
    #[arg(long, global = true, env = "COMMA_HOME", default_value = "comma-home")]
    home: PathBuf,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic release in the upstream JSON layout.
    SynthRelease(commands::corpus::SynthArgs),
    /// Align annotations into instances, split by story, write stats.
    BuildCorpus(commands::corpus::BuildCorpusArgs),
    /// Build a concept knowledge base from the train split.
    BuildKb(commands::kb::BuildKbArgs),
    /// Train a classifier (eu, mu) or an action generator (cag).
    Train(commands::train::TrainArgs),
    /// Score a trained model on a split.
    Eval(commands::eval::EvalArgs),
    /// Stream predictions as JSON lines.
    Predict(commands::predict::PredictArgs),
    /// Motivation x emotion matrix from EU predictions.
    VisualizeMatrix(commands::matrix::MatrixArgs),
    /// Blind two systems' actions into an annotation sheet.
    ExportHumanEval(commands::human::ExportArgs),
    /// Unblind annotated sheets and summarize the A/B test.
    ImportHumanEval(commands::human::ImportArgs),
}

/// Every long flag of every subcommand, as accepted config keys.
fn known_keys() -> BTreeSet<String> {
    let cmd = Cli::command();
    cmd.get_subcommands()
        .flat_map(|s| s.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect::<Vec<_>>())
        .filter(|k| k != "config" && k != "home" && k != "help")
        .collect()
}

fn run(cli: Cli) -> CliResult<()> {
    let mut settings = Settings::load(cli.config.as_deref(), &known_keys())?;
    let home = cli.home;
    match cli.command {
        Command::SynthRelease(a) => commands::corpus::synth_release(a, &home, &mut settings),
        Command::BuildCorpus(a) => commands::corpus::build_corpus(a, &home, &mut settings),
        Command::BuildKb(a) => commands::kb::build_kb(a, &home, &mut settings),
        Command::Train(a) => commands::train::train(a, &home, &mut settings),
        Command::Eval(a) => commands::eval::eval(a, &home, &mut settings),
        Command::Predict(a) => commands::predict::predict(a, &home, &mut settings),
        Command::VisualizeMatrix(a) => commands::matrix::visualize(a, &home, &mut settings),
        Command::ExportHumanEval(a) => commands::human::export(a, &home, &mut settings),
        Command::ImportHumanEval(a) => commands::human::import(a, &home, &mut settings),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                e.exit();
            }
            let err = CliError::config(e.to_string());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

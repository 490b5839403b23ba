//! `finsql`: command-line entry point for linking, calibration, inference,
//! augmentation and adapter management.

mod augment;
mod commands;
mod lora;
mod output;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use finsql_core::augment::AugmentError;
use finsql_core::calibration::CalibrationError;
use finsql_core::linking::LinkError;
use finsql_core::llm::LlmError;
use finsql_core::pipeline::PipelineError;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  invalid input or I/O failure
  2  every calibration candidate was rejected
  3  transport failure talking to a model or scorer endpoint";

#[derive(Parser)]
#[command(name = "finsql", version, about = "Text-to-SQL toolkit for financial databases", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Link, prompt, sample and calibrate for one question.
    Infer(commands::InferArgs),
    /// Calibrate a candidate set read from a JSON file.
    Calibrate(commands::CalibrateArgs),
    /// Print the skeleton of a SQL query.
    Skeleton {
        /// Query text.
        sql: String,
    },
    /// Rank tables and columns of a schema for a question.
    Link(commands::LinkArgs),
    /// Recall@k and AUC of the linker over a labelled question set.
    EvalLinking(commands::EvalLinkingArgs),
    /// Generate augmented training data.
    Augment(augment::AugmentArgs),
    /// Manage adapter plugins.
    Lora {
        /// Plugin hub directory.
        #[arg(long, global = true, default_value = "hub")]
        hub: PathBuf,
        #[command(subcommand)]
        command: lora::LoraCommand,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Infer(args) => commands::infer(args),
        Command::Calibrate(args) => commands::calibrate(args),
        Command::Skeleton { sql } => commands::skeleton(&sql),
        Command::Link(args) => commands::link(args),
        Command::EvalLinking(args) => commands::eval_linking(args),
        Command::Augment(args) => augment::run(args),
        Command::Lora { hub, command } => lora::run(&hub, command),
    }
}

fn is_transport(e: &LlmError) -> bool {
    !matches!(e, LlmError::InvalidRequest(_) | LlmError::ScriptExhausted { .. })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return match e {
                PipelineError::Calibration(CalibrationError::AllCandidatesRejected { .. }) => 2,
                PipelineError::Llm(l) if is_transport(l) => 3,
                PipelineError::Link(LinkError::ScorerFailure(_)) => 3,
                _ => 1,
            };
        }
        if let Some(CalibrationError::AllCandidatesRejected { .. }) = cause.downcast_ref() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<LlmError>() {
            return if is_transport(e) { 3 } else { 1 };
        }
        if let Some(AugmentError::Generation(e)) = cause.downcast_ref() {
            return if is_transport(e) { 3 } else { 1 };
        }
        if let Some(LinkError::ScorerFailure(_)) = cause.downcast_ref() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("FINSQL_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

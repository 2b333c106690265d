//! `dialokit` — a command-line toolkit for cleaning, scoring, and growing
//! open-domain dialogue corpora.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Globals;

#[derive(Debug, Parser)]
#[command(
    name = "dialokit",
    version,
    about = "Dialogue corpus toolkit: stats, quality scoring, filtering, \
             n-gram language models, decoding, self-chat, and metrics",
    propagate_version = true
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for batch stages (0 = one per CPU core). Results
    /// never depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Stop at the first malformed corpus record instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
    /// Print the configuration schema (defaults plus environment-override
    /// syntax) as JSON and exit.
    #[arg(long, global = true)]
    config_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize a corpus: sessions, utterances, tokens, averages.
    Stats(commands::stats::StatsArgs),
    /// Train an n-gram language model and save it.
    TrainLm(commands::train_lm::TrainLmArgs),
    /// Score sessions for relevance, fluency, and entertainment content.
    Score(commands::score::ScoreArgs),
    /// Clean a corpus with the staged filter pipeline.
    Filter(commands::filter::FilterArgs),
    /// Generate one response for a context.
    Decode(commands::decode::DecodeArgs),
    /// Grow synthetic dialogues by alternating two scorers.
    Selfchat(commands::selfchat::SelfchatArgs),
    /// Score a hypothesis file against a reference file.
    Eval(commands::eval::EvalArgs),
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    if cli.config_schema {
        println!(
            "{}",
            serde_json::to_string_pretty(&config::schema_json())
                .expect("the default configuration serializes")
        );
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (run with --help for usage)");
        return ExitCode::from(EXIT_USAGE);
    };

    let tool_config = match config::ToolConfig::load(cli.config.as_deref(), std::env::vars()) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(EXIT_DATA);
        }
    };
    let globals = Globals { config: tool_config, workers: cli.workers, strict: cli.strict };

    let result = match &command {
        Command::Stats(args) => commands::stats::run(&globals, args),
        Command::TrainLm(args) => commands::train_lm::run(&globals, args),
        Command::Score(args) => commands::score::run(&globals, args),
        Command::Filter(args) => commands::filter::run(&globals, args),
        Command::Decode(args) => commands::decode::run(&globals, args),
        Command::Selfchat(args) => commands::selfchat::run(&globals, args),
        Command::Eval(args) => commands::eval::run(&globals, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

use std::path::PathBuf;

use dialokit_core::corpus::{load_line_list, Utterance};
use dialokit_core::decoding::{self_chat_batch, SequenceScorer};

use super::{build_scorer, write_sessions_out, DecodeOverrides, Globals};

/// Arguments for `selfchat`.
#[derive(Debug, clap::Args)]
#[command(
    group(clap::ArgGroup::new("speaker_a").args(["scorer_table", "scorer_lm"])),
    group(clap::ArgGroup::new("speaker_b").args(["scorer_table_b", "scorer_lm_b"]))
)]
pub struct SelfchatArgs {
    /// Opening lines, one per line (`#` comments and blanks skipped).
    #[arg(long)]
    pub openings: PathBuf,
    /// Utterances per session, the opening included.
    #[arg(long, default_value_t = 10)]
    pub max_utterances: usize,
    /// Table scorer for the first speaker.
    #[arg(long, value_name = "FILE")]
    pub scorer_table: Option<PathBuf>,
    /// Model scorer for the first speaker (default: `[paths].model`).
    #[arg(long, value_name = "FILE")]
    pub scorer_lm: Option<PathBuf>,
    /// Table scorer for the second speaker (default: same as the first).
    #[arg(long, value_name = "FILE")]
    pub scorer_table_b: Option<PathBuf>,
    /// Model scorer for the second speaker.
    #[arg(long, value_name = "FILE")]
    pub scorer_lm_b: Option<PathBuf>,
    /// Write sessions here instead of stdout.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: DecodeOverrides,
}

pub fn run(globals: &Globals, args: &SelfchatArgs) -> anyhow::Result<()> {
    let config = &globals.config;
    let speaker_a = build_scorer(
        args.scorer_table.as_deref(),
        args.scorer_lm.as_deref(),
        config.paths.model.as_deref(),
    )?;
    let speaker_b: Option<Box<dyn SequenceScorer>> =
        match (&args.scorer_table_b, &args.scorer_lm_b) {
            (None, None) => None,
            (table, model) => Some(build_scorer(table.as_deref(), model.as_deref(), None)?),
        };
    let speaker_b: &dyn SequenceScorer = speaker_b.as_deref().unwrap_or(speaker_a.as_ref());

    let openings: Vec<Utterance> = load_line_list(&args.openings)?
        .into_iter()
        .map(Utterance::new)
        .collect::<Result<_, _>>()?;
    if openings.is_empty() {
        anyhow::bail!("{} contains no opening lines", args.openings.display());
    }

    let tokenizer = config.data_tokenizer()?;
    let decode_config = args.overrides.apply(&config.decode);
    let sessions = self_chat_batch(
        speaker_a.as_ref(),
        speaker_b,
        &openings,
        args.max_utterances,
        &decode_config,
        &tokenizer,
        globals.workers,
    )?;
    write_sessions_out(args.output.as_deref(), &sessions)?;
    eprintln!("generated {} sessions of {} utterances", sessions.len(), args.max_utterances);
    Ok(())
}

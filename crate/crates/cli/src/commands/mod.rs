//! Subcommand implementations and the plumbing they share.

pub mod decode;
pub mod eval;
pub mod filter;
pub mod score;
pub mod selfchat;
pub mod stats;
pub mod train_lm;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;

use dialokit_core::corpus::{DialogueSession, SessionWriter};
use dialokit_core::decoding::{DecodeConfig, LmScorer, SequenceScorer, Strategy, TableScorer};
use dialokit_core::ngram::NGramLM;
use dialokit_core::quality::{train_reference_classifier, QualityScorer};

use crate::config::ToolConfig;

/// Settings shared by every subcommand.
pub struct Globals {
    pub config: ToolConfig,
    /// Worker threads for batch stages; 0 sizes to the machine.
    pub workers: usize,
    /// Fail on the first malformed corpus record instead of skipping it.
    pub strict: bool,
}

/// Which relevance classifier a command should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ClassifierChoice {
    /// Leave the classifier signal at its neutral zero.
    None,
    /// Train the bundled classifier on the input corpus, with shuffled
    /// responses as negatives.
    Reference,
}

/// A writer for `--output`-style flags: the named file, or stdout.
pub fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating output file {}", path.display()))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

/// Write sessions as JSONL to a file or stdout.
pub fn write_sessions_out(
    path: Option<&Path>,
    sessions: &[DialogueSession],
) -> anyhow::Result<()> {
    let label = path.map_or_else(|| "<stdout>".into(), Path::to_path_buf);
    let mut writer = SessionWriter::new(open_output(path)?, label);
    for session in sessions {
        writer.write(session)?;
    }
    writer.finish()?;
    Ok(())
}

/// Build the decode scorer from the mutually exclusive scorer flags,
/// falling back to the configured model path when neither is given.
pub fn build_scorer(
    table: Option<&Path>,
    model: Option<&Path>,
    fallback_model: Option<&Path>,
) -> anyhow::Result<Box<dyn SequenceScorer>> {
    if let Some(path) = table {
        return Ok(Box::new(TableScorer::from_path(path)?));
    }
    match model.or(fallback_model) {
        Some(path) => Ok(Box::new(LmScorer::new(Arc::new(NGramLM::load(path)?)))),
        None => anyhow::bail!(
            "no scorer: pass --scorer-table or --scorer-lm, or set [paths].model in the config"
        ),
    }
}

/// Assemble a quality scorer from the configuration plus command flags.
/// Returns the scorer and whether a classifier is attached (callers use
/// that to decide whether classifier-derived aggregates make sense).
pub fn build_quality_scorer(
    globals: &Globals,
    sessions: &[DialogueSession],
    choice: ClassifierChoice,
    classifier_seed: u64,
    model_flag: Option<&Path>,
) -> anyhow::Result<(QualityScorer, bool)> {
    let config = &globals.config;
    config.weights.validate()?;
    let params = config.relevance.params();
    params.validate()?;

    let mut scorer = QualityScorer::new(config.data_tokenizer()?)
        .relevance_params(params)
        .s2_floor(config.relevance.s2_floor)
        .weights(config.weights)
        .stars(config.star_list()?);
    if let Some(path) = model_flag.or(config.paths.model.as_deref()) {
        scorer = scorer.lm(Arc::new(NGramLM::load(path)?));
    }
    let with_classifier = choice == ClassifierChoice::Reference;
    if with_classifier {
        log::info!("training the reference classifier on {} sessions", sessions.len());
        let classifier =
            train_reference_classifier(sessions, &config.data_tokenizer()?, classifier_seed)?;
        scorer = scorer.classifier(Arc::new(classifier));
    }
    Ok((scorer, with_classifier))
}

/// Decode knobs exposed as flags by `decode` and `selfchat`; unset flags
/// defer to the `[decode]` config section.
#[derive(Debug, clap::Args)]
pub struct DecodeOverrides {
    /// Decoding strategy: greedy, sampling, beam, or beam-sampling.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    /// Sampling temperature (> 0).
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Nucleus mass to keep, in (0, 1].
    #[arg(long)]
    pub top_p: Option<f64>,
    /// Beam width for the beam strategies.
    #[arg(long)]
    pub beam_size: Option<usize>,
    /// Length-penalty exponent for ranking finished hypotheses.
    #[arg(long)]
    pub length_penalty: Option<f64>,
    /// Tokens required before the end marker may be chosen.
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Ban repeating any n-gram of this size (0 disables the ban).
    #[arg(long)]
    pub no_repeat_n: Option<usize>,
    /// Maximum tokens to generate per utterance.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Keep only this many trailing context tokens.
    #[arg(long)]
    pub max_context: Option<usize>,
    /// Seed for the sampling strategies.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl DecodeOverrides {
    pub fn apply(&self, base: &DecodeConfig) -> DecodeConfig {
        DecodeConfig {
            strategy: self.strategy.unwrap_or(base.strategy),
            temperature: self.temperature.unwrap_or(base.temperature),
            top_p: self.top_p.unwrap_or(base.top_p),
            beam_size: self.beam_size.unwrap_or(base.beam_size),
            length_penalty: self.length_penalty.unwrap_or(base.length_penalty),
            min_len: self.min_len.unwrap_or(base.min_len),
            no_repeat_n: self.no_repeat_n.unwrap_or(base.no_repeat_n),
            max_len: self.max_len.unwrap_or(base.max_len),
            max_context: self.max_context.unwrap_or(base.max_context),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

fn parse_strategy(raw: &str) -> Result<Strategy, String> {
    match raw {
        "greedy" => Ok(Strategy::Greedy),
        "sampling" => Ok(Strategy::Sampling),
        "beam" => Ok(Strategy::Beam),
        "beam-sampling" | "beam+sampling" => Ok(Strategy::BeamSampling),
        other => Err(format!(
            "unknown strategy {other:?} (expected greedy, sampling, beam, or beam-sampling)"
        )),
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;

use dialokit_core::corpus::{collect_sessions, CorpusFormat};
use dialokit_core::ngram::{train_lm, LmConfig, Smoothing};

use super::Globals;

/// Arguments for `train-lm`.
#[derive(Debug, clap::Args)]
pub struct TrainLmArgs {
    /// Training corpus (JSONL sessions).
    pub corpus: PathBuf,
    /// Where to write the trained model.
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// n-gram order (history length + 1).
    #[arg(long)]
    pub order: Option<usize>,
    /// Smoothing scheme.
    #[arg(long, value_enum)]
    pub smoothing: Option<SmoothingKind>,
    /// Pseudo-count for additive smoothing; passing it selects add-k
    /// unless --smoothing says otherwise.
    #[arg(long)]
    pub k: Option<f64>,
    /// Fold tokens seen fewer than this many times into the unknown
    /// marker.
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Also export the model as ARPA text to this path.
    #[arg(long)]
    pub arpa: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SmoothingKind {
    KneserNey,
    AddK,
}

/// Default pseudo-count when add-k is selected without an explicit `--k`
/// and the config file does not provide one.
const DEFAULT_ADD_K: f64 = 0.5;

fn resolve_smoothing(
    base: Smoothing,
    kind: Option<SmoothingKind>,
    k: Option<f64>,
) -> anyhow::Result<Smoothing> {
    match (kind, k) {
        (Some(SmoothingKind::KneserNey), Some(_)) => {
            anyhow::bail!("--k only applies to add-k smoothing")
        }
        (Some(SmoothingKind::KneserNey), None) => Ok(Smoothing::KneserNey),
        (Some(SmoothingKind::AddK), k) => Ok(Smoothing::AddK {
            k: k.unwrap_or(match base {
                Smoothing::AddK { k } => k,
                Smoothing::KneserNey => DEFAULT_ADD_K,
            }),
        }),
        (None, Some(k)) => Ok(Smoothing::AddK { k }),
        (None, None) => Ok(base),
    }
}

pub fn run(globals: &Globals, args: &TrainLmArgs) -> anyhow::Result<()> {
    let config = &globals.config;
    let tokenizer = config.data_tokenizer()?;
    let sessions = collect_sessions(&args.corpus, CorpusFormat::Jsonl, globals.strict)?;
    let lm_config = LmConfig {
        order: args.order.unwrap_or(config.lm.order),
        smoothing: resolve_smoothing(config.lm.smoothing, args.smoothing, args.k)?,
        min_count: args.min_count.unwrap_or(config.lm.min_count),
    };
    let lm = train_lm(sessions.iter(), &tokenizer, &lm_config)?;
    lm.save(&args.output)?;
    if let Some(path) = &args.arpa {
        let file = File::create(path)
            .with_context(|| format!("creating ARPA file {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        lm.export_arpa(&mut writer)
            .and_then(|()| writer.flush())
            .with_context(|| format!("writing ARPA file {}", path.display()))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "sessions": sessions.len(),
            "vocab_size": lm.vocab().len(),
            "order": lm.order(),
            "model": args.output.display().to_string(),
        })
    );
    Ok(())
}

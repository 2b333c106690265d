use std::path::PathBuf;

use dialokit_core::corpus::{corpus_stats_file, CorpusFormat};

use super::Globals;

/// Arguments for `stats`.
#[derive(Debug, clap::Args)]
pub struct StatsArgs {
    /// Corpus file: one JSON session per line.
    pub corpus: PathBuf,
}

pub fn run(globals: &Globals, args: &StatsArgs) -> anyhow::Result<()> {
    let tokenizer = globals.config.data_tokenizer()?;
    let stats =
        corpus_stats_file(&args.corpus, CorpusFormat::Jsonl, &tokenizer, globals.strict)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

use std::io::Write as _;
use std::path::PathBuf;

use dialokit_core::corpus::{collect_sessions, CorpusFormat};
use dialokit_core::filters::{run_pipeline, FilterStage};

use super::{
    build_quality_scorer, open_output, write_sessions_out, ClassifierChoice, Globals,
};

/// Arguments for `filter`.
#[derive(Debug, clap::Args)]
pub struct FilterArgs {
    /// Corpus file: one JSON session per line.
    pub corpus: PathBuf,
    /// Surviving sessions (JSONL); stdout when omitted.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Write one JSON record per rejected session: id, stage, detail.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    /// Relevance classifier for the quality score, trained on the input
    /// corpus before filtering.
    #[arg(long, value_enum, default_value = "none")]
    pub classifier: ClassifierChoice,
    /// Seed for sampling the classifier's shuffled negatives.
    #[arg(long, default_value_t = 0)]
    pub classifier_seed: u64,
    /// Language model for the fluency signal (default: `[paths].model`).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn run(globals: &Globals, args: &FilterArgs) -> anyhow::Result<()> {
    let config = &globals.config;
    let tokenizer = config.data_tokenizer()?;
    let filter_config = config.filter_config()?;
    let sessions = collect_sessions(&args.corpus, CorpusFormat::Jsonl, globals.strict)?;
    let input_count = sessions.len();
    let (scorer, _) = build_quality_scorer(
        globals,
        &sessions,
        args.classifier,
        args.classifier_seed,
        args.model.as_deref(),
    )?;

    let result = run_pipeline(
        sessions,
        &filter_config,
        &tokenizer,
        |session| scorer.score_session(session),
        globals.workers,
    )?;

    write_sessions_out(args.output.as_deref(), &result.kept)?;
    if let Some(path) = &args.rejects {
        let mut out = open_output(Some(path))?;
        for rejection in &result.rejections {
            writeln!(out, "{}", serde_json::to_string(rejection)?)?;
        }
        out.flush()?;
    }

    let count = |stage: FilterStage| {
        result.rejections.iter().filter(|r| r.stage == stage).count()
    };
    eprintln!(
        "kept {}/{} sessions (rejected: dataset {}, rule {}, classifier {}, context {})",
        result.kept.len(),
        input_count,
        count(FilterStage::Dataset),
        count(FilterStage::Rule),
        count(FilterStage::Classifier),
        count(FilterStage::Context),
    );
    Ok(())
}

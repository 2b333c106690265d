use std::io::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use dialokit_core::corpus::{collect_sessions, CorpusFormat};
use dialokit_core::quality::{corpus_relevance, QualityReport};

use super::{build_quality_scorer, open_output, ClassifierChoice, Globals};

/// Arguments for `score`.
#[derive(Debug, clap::Args)]
pub struct ScoreArgs {
    /// Corpus file: one JSON session per line.
    pub corpus: PathBuf,
    /// Relevance classifier to apply.
    #[arg(long, value_enum, default_value = "none")]
    pub classifier: ClassifierChoice,
    /// Seed for sampling the classifier's shuffled negatives.
    #[arg(long, default_value_t = 0)]
    pub classifier_seed: u64,
    /// Language model for the fluency signal (default: `[paths].model`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Print one aggregate JSON object instead of per-session lines.
    #[arg(long)]
    pub summary: bool,
    /// Write to this file instead of stdout.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScoredRow<'a> {
    id: &'a str,
    #[serde(flatten)]
    report: QualityReport,
}

pub fn run(globals: &Globals, args: &ScoreArgs) -> anyhow::Result<()> {
    let sessions = collect_sessions(&args.corpus, CorpusFormat::Jsonl, globals.strict)?;
    if sessions.is_empty() {
        anyhow::bail!("{} contains no sessions", args.corpus.display());
    }
    let (scorer, with_classifier) = build_quality_scorer(
        globals,
        &sessions,
        args.classifier,
        args.classifier_seed,
        args.model.as_deref(),
    )?;
    let reports = scorer.score_batch(&sessions, globals.workers)?;

    let mut out = open_output(args.output.as_deref())?;
    if args.summary {
        let n = reports.len() as f64;
        let mean = |pick: fn(&QualityReport) -> f64| reports.iter().map(pick).sum::<f64>() / n;
        let mut summary = serde_json::json!({
            "n_sessions": reports.len(),
            "mean_s1": mean(|r| r.s1),
            "mean_s2": mean(|r| r.s2),
            "mean_s3": mean(|r| r.s3),
            "mean_combined": mean(|r| r.combined),
            "entertainment_sessions": reports.iter().filter(|r| r.entertainment).count(),
        });
        if with_classifier {
            // The report stores ln(p); invert it to recover acceptance.
            summary["corpus_relevance"] =
                corpus_relevance(reports.iter().map(|r| r.s2.exp())).into();
        }
        writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    } else {
        for (session, report) in sessions.iter().zip(&reports) {
            let row = ScoredRow { id: session.id(), report: *report };
            writeln!(out, "{}", serde_json::to_string(&row)?)?;
        }
    }
    out.flush()?;
    Ok(())
}

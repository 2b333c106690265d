use std::path::PathBuf;

use anyhow::Context;

use dialokit_core::metrics::{evaluate, EvalPair};

use super::Globals;

/// Arguments for `eval`.
#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Hypothesis file: one utterance per line.
    #[arg(long = "hyp", value_name = "FILE")]
    pub hypothesis: PathBuf,
    /// Reference file, line-aligned with the hypotheses.
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: PathBuf,
}

pub fn run(globals: &Globals, args: &EvalArgs) -> anyhow::Result<()> {
    let tokenizer = globals.config.metrics_tokenizer()?;
    let read = |path: &PathBuf| {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    };
    let hyp_text = read(&args.hypothesis)?;
    let ref_text = read(&args.reference)?;
    let hyp_lines: Vec<&str> = hyp_text.lines().collect();
    let ref_lines: Vec<&str> = ref_text.lines().collect();
    if hyp_lines.len() != ref_lines.len() {
        anyhow::bail!(
            "line counts differ: {} hypotheses vs {} references",
            hyp_lines.len(),
            ref_lines.len()
        );
    }

    let pairs: Vec<EvalPair> = hyp_lines
        .iter()
        .zip(&ref_lines)
        .map(|(hyp, reference)| EvalPair {
            hypothesis: tokenizer.tokenize(hyp),
            reference: tokenizer.tokenize(reference),
        })
        .collect();
    let report = evaluate(&pairs, globals.workers)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

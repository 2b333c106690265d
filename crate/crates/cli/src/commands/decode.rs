use std::path::PathBuf;

use dialokit_core::decoding;

use super::{build_scorer, DecodeOverrides, Globals};

/// Arguments for `decode`.
#[derive(Debug, clap::Args)]
#[command(group(
    clap::ArgGroup::new("scorer").args(["scorer_table", "scorer_lm"])
))]
pub struct DecodeArgs {
    /// Table scorer: JSONL rows of next-token distributions.
    #[arg(long, value_name = "FILE")]
    pub scorer_table: Option<PathBuf>,
    /// Language-model scorer: a trained model file (default:
    /// `[paths].model`).
    #[arg(long, value_name = "FILE")]
    pub scorer_lm: Option<PathBuf>,
    /// Context text, tokenized with the configured tokenizer.
    #[arg(long, default_value = "")]
    pub context: String,
    /// Pre-tokenized context: space-separated tokens, bypassing the
    /// tokenizer.
    #[arg(long, conflicts_with = "context")]
    pub context_tokens: Option<String>,
    #[command(flatten)]
    pub overrides: DecodeOverrides,
}

pub fn run(globals: &Globals, args: &DecodeArgs) -> anyhow::Result<()> {
    let config = &globals.config;
    let scorer = build_scorer(
        args.scorer_table.as_deref(),
        args.scorer_lm.as_deref(),
        config.paths.model.as_deref(),
    )?;
    let decode_config = args.overrides.apply(&config.decode);
    let tokenizer = config.data_tokenizer()?;
    let context: Vec<String> = match &args.context_tokens {
        Some(tokens) => tokens.split_whitespace().map(str::to_string).collect(),
        None if args.context.is_empty() => Vec::new(),
        None => tokenizer.tokenize(&args.context).into_inner(),
    };

    let result = decoding::decode(scorer.as_ref(), &context, &decode_config)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "tokens": result.tokens.as_slice(),
            "text": tokenizer.detokenize(result.tokens.as_slice()),
            "cum_logprob": result.cum_logprob,
            "step_logprobs": result.step_logprobs,
            "all_masked_fallback": result.all_masked_fallback,
            "seed": result.seed,
        }))?
    );
    Ok(())
}

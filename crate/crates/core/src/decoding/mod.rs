//! Decoding: turning a next-token scorer into token sequences.
//!
//! The engine is model-agnostic: anything implementing [`SequenceScorer`]
//! can be decoded with greedy search, ancestral sampling, beam search, or
//! beam search with per-step sampling. Each step's raw distribution passes
//! through a fixed mask chain — temperature, minimum-length, no-repeat
//! n-gram, nucleus (top-p) — before a token is chosen.

pub mod dist;
mod engine;
mod scorers;
mod selfchat;

pub use engine::decode;
pub use scorers::{LmScorer, TableScorer};
pub use selfchat::{self_chat, self_chat_batch};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};

/// End-of-dialogue marker assumed by scorers that don't declare their own.
pub const DEFAULT_EOD: &str = "<EOD>";

/// A conditional next-token distribution provider.
pub trait SequenceScorer: Send + Sync {
    /// The fixed vocabulary distributions are emitted over, index-aligned
    /// with [`next_dist`](Self::next_dist) output.
    fn vocab(&self) -> &[String];

    /// The end-of-dialogue token that terminates generation. Must be a
    /// member of [`vocab`](Self::vocab).
    fn eod_token(&self) -> &str {
        DEFAULT_EOD
    }

    /// `P(next | context, prefix)` over the vocabulary. Implementations
    /// must return one finite, non-negative entry per vocabulary token,
    /// summing to 1 within 1e-9.
    fn next_dist(&self, context: &[String], prefix: &[String]) -> Result<Vec<f64>>;
}

/// Decoding strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Argmax of the masked distribution each step.
    Greedy,
    /// One ancestral sample per step.
    Sampling,
    /// Fixed-width beam search, expanding each hypothesis with its top
    /// candidates.
    Beam,
    /// Beam search whose per-hypothesis candidates are sampled (without
    /// replacement) from the masked distribution instead of taken top-k.
    #[default]
    #[serde(alias = "beam+sampling")]
    BeamSampling,
}

/// All decoding knobs. The defaults are the settings that won the final
/// human evaluation in the experiments this engine reproduces: beam search
/// with sampling, temperature 0.9, top-p 0.9, beam 4, length penalty 1.6,
/// no-repeat 4-grams, 128-token turns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    /// Sharpens (<1) or flattens (>1) the distribution before other masks.
    pub temperature: f64,
    /// Nucleus mass: smallest top set of tokens whose probability reaches
    /// this value keeps its (renormalized) mass; the rest drop to zero.
    pub top_p: f64,
    pub beam_size: usize,
    /// Exponent α in the final beam ranking `logprob / len^α`.
    pub length_penalty: f64,
    /// Suppress the end token until this many tokens are generated.
    pub min_len: usize,
    /// Forbid regenerating any n-gram of this size already present in the
    /// context or the generated prefix. 0 disables the mask.
    pub no_repeat_n: usize,
    /// Hard cap on generated tokens per sequence.
    pub max_len: usize,
    /// Only the last this-many context tokens are shown to the scorer.
    pub max_context: usize,
    /// Seed for the sampling strategies.
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            strategy: Strategy::default(),
            temperature: 0.9,
            top_p: 0.9,
            beam_size: 4,
            length_penalty: 1.6,
            min_len: 0,
            no_repeat_n: 4,
            max_len: 128,
            max_context: 128,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if self.beam_size == 0 {
            return Err(Error::Config("beam_size must be at least 1".into()));
        }
        if !self.length_penalty.is_finite() || self.length_penalty < 0.0 {
            return Err(Error::Config(format!(
                "length_penalty must be finite and non-negative, got {}",
                self.length_penalty
            )));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "min_len {} exceeds max_len {}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

/// What a decode produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Generated tokens, end marker excluded.
    pub tokens: TokenSeq,
    /// Sum of `step_logprobs`. Sequences that ended on the end marker
    /// include that step's factor; sequences cut at `max_len` do not.
    pub cum_logprob: f64,
    /// Per-step natural-log probability of each chosen token under the
    /// fully masked distribution.
    pub step_logprobs: Vec<f64>,
    /// True if any step's masks zeroed the whole distribution and the step
    /// fell back to the pre-mask distribution.
    pub all_masked_fallback: bool,
    /// Seed the decode ran with (for reproducing sampled output).
    pub seed: u64,
}

/// Final beam ranking score: cumulative log-probability divided by
/// `len^α`. Longer sequences are penalized less for their accumulated
/// negative mass as α grows. A zero-length hypothesis is scored at length 1.
pub fn length_penalized_score(cum_logprob: f64, len: usize, alpha: f64) -> f64 {
    cum_logprob / (len.max(1) as f64).powf(alpha)
}

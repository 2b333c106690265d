//! Self-chat: two scorers alternate turns to grow a synthetic dialogue
//! from an opening utterance.

use super::{decode, DecodeConfig, SequenceScorer};
use crate::corpus::{DialogueSession, Tokenizer, Utterance};
use crate::error::{Error, Result};
use crate::exec;

/// Weyl-sequence increment used to derive independent per-turn and
/// per-session seeds from one base seed.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(SEED_STRIDE);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Grow one dialogue of exactly `max_utterances` turns. The opening is
/// turn zero; `scorer_a` speaks the odd turns, `scorer_b` the even ones.
///
/// Each turn decodes against the full dialogue so far, tokenized and
/// joined with the active scorer's end marker between utterances. The
/// minimum length is raised to at least one so a turn cannot be empty,
/// and every turn gets its own seed derived from `config.seed`, keeping
/// whole sessions reproducible.
pub fn self_chat(
    scorer_a: &dyn SequenceScorer,
    scorer_b: &dyn SequenceScorer,
    opening: &Utterance,
    max_utterances: usize,
    config: &DecodeConfig,
    tokenizer: &Tokenizer,
    session_id: impl Into<String>,
) -> Result<DialogueSession> {
    if max_utterances < 2 {
        return Err(Error::Config(format!(
            "self-chat needs at least 2 utterances per session, got {max_utterances}"
        )));
    }
    config.validate()?;

    let mut utterances = vec![opening.clone()];
    for turn in 1..max_utterances {
        let scorer = if turn % 2 == 1 { scorer_a } else { scorer_b };
        let separator = scorer.eod_token();
        let mut context: Vec<String> = Vec::new();
        for (i, utterance) in utterances.iter().enumerate() {
            if i > 0 {
                context.push(separator.to_string());
            }
            context.extend(utterance.tokens(tokenizer).iter().cloned());
        }
        let turn_config = DecodeConfig {
            min_len: config.min_len.max(1),
            seed: config.seed.wrapping_add((turn as u64).wrapping_mul(SEED_STRIDE)),
            ..*config
        };
        let result = decode(scorer, &context, &turn_config)?;
        if result.tokens.is_empty() {
            return Err(Error::Scorer(format!(
                "self-chat turn {turn} produced an empty utterance"
            )));
        }
        utterances.push(Utterance::new(tokenizer.detokenize(result.tokens.as_slice()))?);
    }
    DialogueSession::new(session_id, "self-chat", utterances)
}

/// Run [`self_chat`] over a batch of openings, one session per opening.
///
/// Sessions are numbered `self-chat-0000`, `self-chat-0001`, … in input
/// order, and each gets an independent seed mixed from `config.seed` and
/// its position, so the output is identical for any worker count.
pub fn self_chat_batch(
    scorer_a: &dyn SequenceScorer,
    scorer_b: &dyn SequenceScorer,
    openings: &[Utterance],
    max_utterances: usize,
    config: &DecodeConfig,
    tokenizer: &Tokenizer,
    workers: usize,
) -> Result<Vec<DialogueSession>> {
    let indexed: Vec<(usize, &Utterance)> = openings.iter().enumerate().collect();
    exec::try_map_ordered(&indexed, workers, |(i, opening)| {
        let session_config =
            DecodeConfig { seed: splitmix64(config.seed ^ (*i as u64 + 1)), ..*config };
        self_chat(
            scorer_a,
            scorer_b,
            opening,
            max_utterances,
            &session_config,
            tokenizer,
            format!("self-chat-{i:04}"),
        )
    })
}

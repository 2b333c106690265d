//! Reference relevance classifier: multinomial naive Bayes over
//! (context token, response token) co-occurrence features.
//!
//! Positives are a corpus's real context/response pairs; negatives are made
//! by giving each context a response drawn from a different session, so no
//! labelled data is needed. The model is deliberately simple — it exists as
//! a trainable stand-in wherever a [`RelevanceClassifier`] is required and
//! as the test oracle for the classifier-based signals, not as a
//! state-of-the-art relevance model.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::RelevanceClassifier;
use crate::corpus::{DialogueSession, TokenSeq, Tokenizer};
use crate::error::{Error, Result};

/// Fewer pairs than this and the co-occurrence table is too sparse to mean
/// anything; training refuses rather than returning a coin-flipper.
pub const MIN_TRAINING_PAIRS: usize = 100;

/// Interned token pair: (context token id, response token id).
type Feature = (u32, u32);

/// Per-feature counts: (relevant class, shuffled class).
#[derive(Debug, Default, Clone, Copy)]
struct FeatureCounts {
    relevant: u64,
    shuffled: u64,
}

/// Naive Bayes over type-level token co-occurrence.
#[derive(Debug)]
pub struct NaiveBayesClassifier {
    token_ids: HashMap<String, u32>,
    counts: HashMap<Feature, FeatureCounts>,
    total_relevant: u64,
    total_shuffled: u64,
    /// Number of distinct features seen in training; the smoothing
    /// denominator treats all unseen features as one extra outcome.
    n_features: u64,
}

impl NaiveBayesClassifier {
    /// Distinct token types, in first-occurrence order.
    fn type_ids(&self, tokens: impl IntoIterator<Item = impl AsRef<str>>) -> Vec<u32> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for token in tokens {
            if let Some(&id) = self.token_ids.get(token.as_ref()) {
                if seen.insert(id) {
                    out.push(id);
                }
            }
        }
        out
    }

    fn log_likelihood(&self, feature: Feature) -> (f64, f64) {
        let c = self.counts.get(&feature).copied().unwrap_or_default();
        let denom_r = (self.total_relevant + self.n_features + 1) as f64;
        let denom_s = (self.total_shuffled + self.n_features + 1) as f64;
        (
            ((c.relevant + 1) as f64 / denom_r).ln(),
            ((c.shuffled + 1) as f64 / denom_s).ln(),
        )
    }
}

impl RelevanceClassifier for NaiveBayesClassifier {
    fn prob_relevant(&self, context: &[TokenSeq], response: &TokenSeq) -> Result<f64> {
        let ctx_types = self.type_ids(context.iter().flat_map(|u| u.iter()));
        let resp_types = self.type_ids(response.iter());

        // Equal class priors (training balances them by construction), so
        // only the likelihood terms matter.
        let mut log_r = 0.0;
        let mut log_s = 0.0;
        for &c in &ctx_types {
            for &r in &resp_types {
                let (lr, ls) = self.log_likelihood((c, r));
                log_r += lr;
                log_s += ls;
            }
        }
        // P(relevant) = σ(log_r - log_s), computed stably.
        let diff = log_s - log_r;
        let p = if diff > 0.0 { (-diff).exp() / (1.0 + (-diff).exp()) } else { 1.0 / (1.0 + diff.exp()) };
        Ok(p)
    }
}

/// Train the reference classifier on a corpus's context/response pairs.
///
/// Every session with at least two utterances contributes one positive
/// pair. Negatives reuse the same contexts with a response sampled (seeded,
/// never the session's own) from another pair, giving balanced classes with
/// no manual labels. Errors with [`Error::TooFewPairs`] below
/// [`MIN_TRAINING_PAIRS`].
pub fn train_reference_classifier<'a>(
    sessions: impl IntoIterator<Item = &'a DialogueSession>,
    tokenizer: &Tokenizer,
    seed: u64,
) -> Result<NaiveBayesClassifier> {
    // Collect type-level features per pair, interning tokens as we go.
    let mut token_ids: HashMap<String, u32> = HashMap::new();
    let intern = |t: &str, ids: &mut HashMap<String, u32>| -> u32 {
        if let Some(&id) = ids.get(t) {
            id
        } else {
            let id = ids.len() as u32;
            ids.insert(t.to_string(), id);
            id
        }
    };

    let mut contexts: Vec<Vec<u32>> = Vec::new();
    let mut responses: Vec<Vec<u32>> = Vec::new();
    for session in sessions {
        let Some(pair) = session.pair() else { continue };
        let mut ctx_types = Vec::new();
        let mut seen = HashSet::new();
        for utterance in pair.context {
            for token in utterance.tokens(tokenizer).iter() {
                let id = intern(token, &mut token_ids);
                if seen.insert(id) {
                    ctx_types.push(id);
                }
            }
        }
        let mut resp_types = Vec::new();
        let mut seen = HashSet::new();
        for token in pair.response.tokens(tokenizer).iter() {
            let id = intern(token, &mut token_ids);
            if seen.insert(id) {
                resp_types.push(id);
            }
        }
        contexts.push(ctx_types);
        responses.push(resp_types);
    }

    let n = contexts.len();
    if n < MIN_TRAINING_PAIRS {
        return Err(Error::TooFewPairs { needed: MIN_TRAINING_PAIRS, got: n });
    }

    let mut counts: HashMap<Feature, FeatureCounts> = HashMap::new();
    let mut total_relevant = 0u64;
    let mut total_shuffled = 0u64;

    for (ctx, resp) in contexts.iter().zip(&responses) {
        for &c in ctx {
            for &r in resp {
                counts.entry((c, r)).or_default().relevant += 1;
                total_relevant += 1;
            }
        }
    }

    // Mismatched pairs: context i with the response of some other pair.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for (i, ctx) in contexts.iter().enumerate() {
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        for &c in ctx {
            for &r in &responses[j] {
                counts.entry((c, r)).or_default().shuffled += 1;
                total_shuffled += 1;
            }
        }
    }

    let n_features = counts.len() as u64;
    Ok(NaiveBayesClassifier { token_ids, counts, total_relevant, total_shuffled, n_features })
}

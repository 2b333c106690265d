//! Per-session quality signals for dialogue corpora.
//!
//! Three numeric signals and one flag are computed for a session's
//! context/response split (all utterances but the last vs. the last):
//!
//! * **s1** — lexical relevance: topical token overlap between response and
//!   context, weighted by how far back in the context each match sits.
//! * **s2** — classifier relevance: log-probability that the response is a
//!   genuine continuation of the context, from a pluggable
//!   [`RelevanceClassifier`], clamped below by a floor so a single confident
//!   negative cannot dominate a combined score.
//! * **s3** — fluency: mean n-gram LM log-probability of the session's
//!   utterances (higher is more fluent).
//! * **entertainment** — whether any utterance mentions a name from a
//!   celebrity list, a cheap proxy for gossip-like chatter.
//!
//! The combined score is the weighted sum `α·s1 + β·s2 + γ·s3`.

mod classifier;

pub use classifier::{train_reference_classifier, NaiveBayesClassifier, MIN_TRAINING_PAIRS};

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_line_list, DialogueSession, TokenSeq, Tokenizer};
use crate::error::{Error, Result};
use crate::exec;
use crate::ngram::NGramLM;

/// Default lower clamp for the classifier relevance log-probability.
pub const DEFAULT_S2_FLOOR: f64 = -20.0;

/// Knobs for the lexical relevance signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceParams {
    /// Exponent on the utterance-index distance weight. 0 makes every
    /// context utterance count equally; larger values emphasise matches
    /// with utterances farther back in the context.
    pub tau: f64,
    /// Count each (token type, context utterance) match once instead of
    /// once per occurrence pair.
    pub dedupe_pairs: bool,
}

impl Default for RelevanceParams {
    fn default() -> Self {
        RelevanceParams { tau: 1.0, dedupe_pairs: false }
    }
}

impl RelevanceParams {
    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::Config(format!("tau must be finite and non-negative, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Lexical relevance of a response to its context.
///
/// With the response at utterance index `n` (0-based context indices
/// `0..n`), a token match with context utterance `i` contributes
/// `(n - i)^tau`. By default every matching occurrence pair contributes;
/// with `dedupe_pairs` each (token type, context utterance) contributes at
/// most once. An empty context or response scores 0.
pub fn relevance_s1(context: &[TokenSeq], response: &TokenSeq, params: &RelevanceParams) -> f64 {
    if context.is_empty() || response.is_empty() {
        log::debug!("lexical relevance over an empty side scores 0");
        return 0.0;
    }
    let n = context.len();
    let mut response_counts: std::collections::HashMap<&str, u64> = std::collections::HashMap::new();
    for token in response {
        *response_counts.entry(token.as_str()).or_insert(0) += 1;
    }

    let mut score = 0.0;
    for (i, utterance) in context.iter().enumerate() {
        let dist = (n - i) as f64;
        let weight = dist.powf(params.tau);
        if params.dedupe_pairs {
            let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
            for token in utterance {
                if response_counts.contains_key(token.as_str()) && seen.insert(token.as_str()) {
                    score += weight;
                }
            }
        } else {
            for token in utterance {
                if let Some(&r) = response_counts.get(token.as_str()) {
                    score += weight * r as f64;
                }
            }
        }
    }
    score
}

/// A model that judges whether a response genuinely continues a context.
pub trait RelevanceClassifier: Send + Sync {
    /// Probability in `[0, 1]` that the response belongs to the context.
    fn prob_relevant(&self, context: &[TokenSeq], response: &TokenSeq) -> Result<f64>;
}

/// Classifier relevance: `ln P(relevant | context, response)`, clamped below
/// by `floor`. The floor keeps one maximally confident rejection from
/// dwarfing every other signal in a weighted sum.
pub fn relevance_s2(
    context: &[TokenSeq],
    response: &TokenSeq,
    classifier: &dyn RelevanceClassifier,
    floor: f64,
) -> Result<f64> {
    let p = classifier.prob_relevant(context, response)?;
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Classifier(format!("probability {p} outside [0, 1]")));
    }
    Ok(p.ln().max(floor))
}

/// Fluency: mean LM log-probability over the session's utterances. Higher
/// (closer to zero) means the utterances look more like the LM's training
/// text.
pub fn fluency_s3(session: &DialogueSession, lm: &NGramLM, tokenizer: &Tokenizer) -> f64 {
    let mut sum = 0.0;
    for utterance in session.utterances() {
        sum += lm.sequence_logprob(&utterance.tokens(tokenizer));
    }
    sum / session.utterances().len() as f64
}

/// A list of celebrity names, pre-normalized for matching.
#[derive(Clone, Debug, Default)]
pub struct StarList {
    normalized: Vec<String>,
}

impl StarList {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::new();
        for name in names {
            let n = normalize_for_match(name.as_ref());
            if !n.is_empty() && seen.insert(n.clone()) {
                normalized.push(n);
            }
        }
        StarList { normalized }
    }

    /// Load from a text file: one name per line, `#` comments allowed.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Ok(StarList::from_names(load_line_list(path)?))
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    /// First listed name that appears in the text, if any.
    pub fn matches(&self, text: &str) -> Option<&str> {
        let haystack = normalize_for_match(text);
        self.normalized.iter().find(|n| haystack.contains(n.as_str())).map(String::as_str)
    }
}

/// Case-fold and map fullwidth ASCII to halfwidth so surface variants of
/// the same name compare equal.
pub fn normalize_for_match(text: &str) -> String {
    text.chars()
        .map(|c| match c as u32 {
            0xFF01..=0xFF5E => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
            0x3000 => ' ',
            _ => c,
        })
        .collect::<String>()
        .to_lowercase()
}

/// True if any utterance mentions a listed name.
pub fn entertainment_flag(session: &DialogueSession, stars: &StarList) -> bool {
    !stars.is_empty()
        && session.utterances().iter().any(|u| stars.matches(u.text()).is_some())
}

/// Mixing weights for the combined quality score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for QualityWeights {
    fn default() -> Self {
        QualityWeights { alpha: 1.0, beta: 1.0, gamma: 1.0 }
    }
}

impl QualityWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !w.is_finite() {
                return Err(Error::Config(format!("weight {name} must be finite, got {w}")));
            }
        }
        if self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0 {
            return Err(Error::Config("at least one quality weight must be non-zero".into()));
        }
        Ok(())
    }
}

/// Weighted combination `α·s1 + β·s2 + γ·s3`.
pub fn combined_score(s1: f64, s2: f64, s3: f64, weights: &QualityWeights) -> f64 {
    weights.alpha * s1 + weights.beta * s2 + weights.gamma * s3
}

/// All quality signals for one session.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub entertainment: bool,
    pub combined: f64,
}

/// Fraction of pairs a classifier accepts (probability above one half) —
/// the corpus-level relevance aggregate.
pub fn corpus_relevance(probs: impl IntoIterator<Item = f64>) -> f64 {
    let mut total = 0u64;
    let mut accepted = 0u64;
    for p in probs {
        total += 1;
        if p > 0.5 {
            accepted += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        accepted as f64 / total as f64
    }
}

/// Bundles the tokenizer, optional models, and weights needed to score
/// sessions. Signals whose model is absent score a neutral 0.
pub struct QualityScorer {
    tokenizer: Tokenizer,
    relevance: RelevanceParams,
    s2_floor: f64,
    weights: QualityWeights,
    classifier: Option<Arc<dyn RelevanceClassifier>>,
    lm: Option<Arc<NGramLM>>,
    stars: StarList,
}

impl QualityScorer {
    pub fn new(tokenizer: Tokenizer) -> Self {
        QualityScorer {
            tokenizer,
            relevance: RelevanceParams::default(),
            s2_floor: DEFAULT_S2_FLOOR,
            weights: QualityWeights::default(),
            classifier: None,
            lm: None,
            stars: StarList::default(),
        }
    }

    pub fn relevance_params(mut self, params: RelevanceParams) -> Self {
        self.relevance = params;
        self
    }

    pub fn s2_floor(mut self, floor: f64) -> Self {
        self.s2_floor = floor;
        self
    }

    pub fn weights(mut self, weights: QualityWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn classifier(mut self, classifier: Arc<dyn RelevanceClassifier>) -> Self {
        self.classifier = Some(classifier);
        self
    }

    pub fn lm(mut self, lm: Arc<NGramLM>) -> Self {
        self.lm = Some(lm);
        self
    }

    pub fn stars(mut self, stars: StarList) -> Self {
        self.stars = stars;
        self
    }

    /// Score one session. Sessions without a context/response split (a
    /// single utterance) get neutral relevance signals.
    pub fn score_session(&self, session: &DialogueSession) -> Result<QualityReport> {
        let pair = session.pair();
        let (context, response): (Vec<TokenSeq>, Option<TokenSeq>) = match &pair {
            Some(p) => (
                p.context.iter().map(|u| u.tokens(&self.tokenizer).into_owned()).collect(),
                Some(p.response.tokens(&self.tokenizer).into_owned()),
            ),
            None => (Vec::new(), None),
        };

        let s1 = match &response {
            Some(r) => relevance_s1(&context, r, &self.relevance),
            None => 0.0,
        };
        let s2 = match (&self.classifier, &response) {
            (Some(clf), Some(r)) => relevance_s2(&context, r, clf.as_ref(), self.s2_floor)?,
            _ => 0.0,
        };
        let s3 = match &self.lm {
            Some(lm) => fluency_s3(session, lm, &self.tokenizer),
            None => 0.0,
        };
        let entertainment = entertainment_flag(session, &self.stars);
        Ok(QualityReport {
            s1,
            s2,
            s3,
            entertainment,
            combined: combined_score(s1, s2, s3, &self.weights),
        })
    }

    /// Score many sessions, spreading the work over `workers` threads.
    /// Output order matches input order for any worker count.
    pub fn score_batch(
        &self,
        sessions: &[DialogueSession],
        workers: usize,
    ) -> Result<Vec<QualityReport>> {
        exec::try_map_ordered(sessions, workers, |s| self.score_session(s))
    }
}

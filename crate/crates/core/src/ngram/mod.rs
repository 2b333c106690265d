//! Smoothed n-gram language models.
//!
//! Two smoothing schemes are supported:
//!
//! * **add-k**: `P(w|h) = (c(h·w) + k) / (c(h) + k·|V|)` over the raw counts
//!   for the queried history length. Simple, and exactly reproducible from
//!   the count tables, which makes it the reference scheme in tests.
//! * **interpolated Kneser-Ney**: absolute discounting at the top order with
//!   continuation-count distributions at the lower orders, interpolated all
//!   the way down to a uniform 1/|V| floor. The discount for each order is
//!   estimated from that order's count-of-counts (`D = n1 / (n1 + 2·n2)`).
//!
//! Probability events are the utterance tokens plus one end-of-sequence
//! marker; histories are left-padded with begin-of-sequence markers. The
//! vocabulary always contains the three reserved markers, and every
//! conditional distribution is normalized over the full vocabulary, so
//! `Σ_w P(w|h) = 1` holds for any history by construction.

mod serialize;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{DialogueSession, Tokenizer};
use crate::error::{Error, Result};

/// Begin-of-sequence marker (history padding; never a prediction event).
pub const BOS: &str = "<s>";
/// End-of-sequence marker, predicted after the last token.
pub const EOS: &str = "</s>";
/// Replacement for tokens below the vocabulary cutoff.
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

/// Smoothing scheme for conditional probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Smoothing {
    /// Additive smoothing with pseudo-count `k` (must be positive).
    AddK { k: f64 },
    /// Interpolated Kneser-Ney with per-order estimated discounts.
    KneserNey,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::KneserNey
    }
}

/// Training-time settings for an n-gram model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    /// Maximum n-gram order (history length + 1). Must be at least 1.
    pub order: usize,
    pub smoothing: Smoothing,
    /// Tokens seen fewer than this many times train as [`UNK`].
    pub min_count: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { order: 3, smoothing: Smoothing::default(), min_count: 1 }
    }
}

impl LmConfig {
    fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        if self.order > 8 {
            return Err(Error::Config("n-gram order above 8 is not supported".into()));
        }
        if let Smoothing::AddK { k } = self.smoothing {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::Config(format!("add-k pseudo-count must be positive, got {k}")));
            }
        }
        Ok(())
    }
}

type Gram = Box<[u32]>;
type CountTable = HashMap<Gram, u64>;

/// A trained n-gram language model.
#[derive(Clone, Debug)]
pub struct NGramLM {
    config: LmConfig,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// `counts[k-1]`: raw k-gram event counts, for k in `1..=order`.
    counts: Vec<CountTable>,
    /// `ctx_totals[l]`: total events per history of length l, `0..order`.
    ctx_totals: Vec<CountTable>,
    /// Kneser-Ney continuation counts for levels `1..order` (empty for
    /// add-k models and order-1 models).
    cont: Vec<CountTable>,
    cont_ctx_totals: Vec<CountTable>,
    /// Distinct continuations `N1+(h·)` per level, `1..=order`.
    distinct_ext: Vec<CountTable>,
    /// Absolute discount per level, `1..=order`.
    discounts: Vec<f64>,
}

impl NGramLM {
    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Full vocabulary, reserved markers first.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Map a surface token to its id; out-of-vocabulary tokens map to the
    /// [`UNK`] id.
    pub fn token_id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// `P(word | history)`. Uses the last `order - 1` history tokens (fewer
    /// if the history is shorter); out-of-vocabulary tokens on either side
    /// are treated as [`UNK`].
    pub fn cond_prob(&self, history: &[&str], word: &str) -> f64 {
        let ids: Vec<u32> = history.iter().map(|t| self.token_id(t)).collect();
        self.cond_prob_ids(&ids, self.token_id(word))
    }

    /// Id-level variant of [`cond_prob`](Self::cond_prob) for hot loops.
    pub fn cond_prob_ids(&self, history: &[u32], word: u32) -> f64 {
        let take = history.len().min(self.config.order - 1);
        let ctx = &history[history.len() - take..];
        match self.config.smoothing {
            Smoothing::AddK { k } => self.prob_addk(ctx, word, k),
            Smoothing::KneserNey => self.prob_kn(ctx, word),
        }
    }

    /// Natural-log probability of a token sequence: the product of one
    /// conditional per token plus one for the end-of-sequence event, with
    /// the history left-padded by begin-of-sequence markers.
    pub fn sequence_logprob(&self, tokens: &[String]) -> f64 {
        let n = self.config.order;
        let mut padded = Vec::with_capacity(n - 1 + tokens.len() + 1);
        padded.resize(n - 1, BOS_ID);
        padded.extend(tokens.iter().map(|t| self.token_id(t)));
        padded.push(EOS_ID);

        let mut sum = 0.0;
        for i in (n - 1)..padded.len() {
            sum += self.prob_for_window(&padded[i + 1 - n..i], padded[i]).ln();
        }
        sum
    }

    fn prob_for_window(&self, ctx: &[u32], word: u32) -> f64 {
        match self.config.smoothing {
            Smoothing::AddK { k } => self.prob_addk(ctx, word, k),
            Smoothing::KneserNey => self.prob_kn(ctx, word),
        }
    }

    fn prob_addk(&self, ctx: &[u32], word: u32, k: f64) -> f64 {
        let vsize = self.vocab.len() as f64;
        let gram = join(ctx, word);
        let c_hw = self.counts[ctx.len()].get(&gram).copied().unwrap_or(0) as f64;
        let c_h = self.ctx_totals[ctx.len()].get(ctx).copied().unwrap_or(0) as f64;
        (c_hw + k) / (c_h + k * vsize)
    }

    /// Interpolated Kneser-Ney, entered at level `|ctx| + 1`. The top level
    /// discounts raw counts; lower levels discount continuation counts; the
    /// unigram level interpolates with a uniform distribution so every
    /// vocabulary word keeps strictly positive mass.
    fn prob_kn(&self, ctx: &[u32], word: u32) -> f64 {
        let level = ctx.len() + 1;
        let vsize = self.vocab.len() as f64;
        if level == 1 {
            let (table, total) = if self.config.order == 1 {
                (&self.counts[0], self.ctx_totals[0].get(&[][..]).copied().unwrap_or(0))
            } else {
                (&self.cont[0], self.cont_ctx_totals[0].get(&[][..]).copied().unwrap_or(0))
            };
            if total == 0 {
                return 1.0 / vsize;
            }
            let d = self.discounts[0];
            let distinct =
                self.distinct_ext[0].get(&[][..]).copied().unwrap_or(0) as f64;
            let c = table.get(&[word][..]).copied().unwrap_or(0) as f64;
            return ((c - d).max(0.0) + d * distinct / vsize) / total as f64;
        }

        let top = level == self.config.order;
        let (table, ctot) = if top {
            (&self.counts[level - 1], self.ctx_totals[level - 1].get(ctx).copied())
        } else {
            (&self.cont[level - 1], self.cont_ctx_totals[level - 1].get(ctx).copied())
        };
        let Some(ctot) = ctot.filter(|&c| c > 0) else {
            // Unseen history: defer entirely to the next shorter history.
            return self.prob_kn(&ctx[1..], word);
        };
        let d = self.discounts[level - 1];
        let ext = self.distinct_ext[level - 1].get(ctx).copied().unwrap_or(0) as f64;
        let c = table.get(&join(ctx, word)).copied().unwrap_or(0) as f64;
        ((c - d).max(0.0) + d * ext * self.prob_kn(&ctx[1..], word)) / ctot as f64
    }

    /// Rebuild every derived table from `config`, `vocab`, and raw
    /// `counts`. Called after training and after deserialization, so a
    /// loaded model is bit-for-bit the same scorer as the trained one.
    fn rebuild_derived(&mut self) {
        let order = self.config.order;

        self.ctx_totals = vec![CountTable::new(); order];
        for l in 0..order {
            let mut totals = CountTable::new();
            for (gram, c) in &self.counts[l] {
                *totals.entry(gram[..l].into()).or_insert(0) += c;
            }
            self.ctx_totals[l] = totals;
        }

        self.cont = Vec::new();
        self.cont_ctx_totals = Vec::new();
        self.distinct_ext = Vec::new();
        self.discounts = Vec::new();
        if self.config.smoothing != Smoothing::KneserNey {
            return;
        }

        // Continuation counts for levels 1..order: how many distinct left
        // extensions each k-gram has, read off the raw (k+1)-gram table.
        for k in 1..order {
            let mut cont = CountTable::new();
            for gram in self.counts[k].keys() {
                *cont.entry(gram[1..].into()).or_insert(0) += 1;
            }
            let mut totals = CountTable::new();
            for (gram, c) in &cont {
                *totals.entry(gram[..k - 1].into()).or_insert(0) += c;
            }
            self.cont.push(cont);
            self.cont_ctx_totals.push(totals);
        }

        for k in 1..=order {
            let table = if k == order { &self.counts[k - 1] } else { &self.cont[k - 1] };
            let mut distinct = CountTable::new();
            for gram in table.keys() {
                *distinct.entry(gram[..k - 1].into()).or_insert(0) += 1;
            }
            self.distinct_ext.push(distinct);
            self.discounts.push(estimate_discount(table));
        }
    }
}

fn join(ctx: &[u32], word: u32) -> Gram {
    let mut v = Vec::with_capacity(ctx.len() + 1);
    v.extend_from_slice(ctx);
    v.push(word);
    v.into_boxed_slice()
}

/// Absolute discount from count-of-counts: `n1 / (n1 + 2·n2)`, falling back
/// to 0.5 when the table has no singletons or no doubletons.
fn estimate_discount(table: &CountTable) -> f64 {
    let mut n1 = 0u64;
    let mut n2 = 0u64;
    for &c in table.values() {
        match c {
            1 => n1 += 1,
            2 => n2 += 1,
            _ => {}
        }
    }
    if n1 == 0 || n2 == 0 {
        0.5
    } else {
        n1 as f64 / (n1 + 2 * n2) as f64
    }
}

/// Train an n-gram model on every utterance of the given sessions.
///
/// Pass one establishes token frequencies and the vocabulary (insertion
/// order, so training is deterministic); pass two counts the k-gram events
/// for every order up to `config.order`.
pub fn train_lm<'a>(
    sessions: impl IntoIterator<Item = &'a DialogueSession>,
    tokenizer: &Tokenizer,
    config: &LmConfig,
) -> Result<NGramLM> {
    config.validate()?;
    let order = config.order;

    let mut frequencies: HashMap<String, u64> = HashMap::new();
    let mut first_seen: Vec<String> = Vec::new();
    let mut utterances: Vec<Vec<String>> = Vec::new();
    for session in sessions {
        for utterance in session.utterances() {
            let tokens = utterance.tokens(tokenizer).into_owned().into_inner();
            for token in &tokens {
                match frequencies.get_mut(token) {
                    Some(c) => *c += 1,
                    None => {
                        frequencies.insert(token.clone(), 1);
                        first_seen.push(token.clone());
                    }
                }
            }
            utterances.push(tokens);
        }
    }
    if utterances.is_empty() {
        return Err(Error::EmptyStream);
    }

    let mut vocab: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
    for token in first_seen {
        if frequencies[&token] >= config.min_count.max(1) && !is_reserved(&token) {
            vocab.push(token);
        }
    }
    let index: HashMap<String, u32> =
        vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();

    let mut counts = vec![CountTable::new(); order];
    for tokens in &utterances {
        let mut padded: Vec<u32> = Vec::with_capacity(order - 1 + tokens.len() + 1);
        padded.resize(order - 1, BOS_ID);
        padded.extend(tokens.iter().map(|t| index.get(t.as_str()).copied().unwrap_or(UNK_ID)));
        padded.push(EOS_ID);
        for i in (order - 1)..padded.len() {
            for k in 1..=order {
                *counts[k - 1].entry(padded[i + 1 - k..=i].into()).or_insert(0) += 1;
            }
        }
    }

    let mut model = NGramLM {
        config: config.clone(),
        vocab,
        index,
        counts,
        ctx_totals: Vec::new(),
        cont: Vec::new(),
        cont_ctx_totals: Vec::new(),
        distinct_ext: Vec::new(),
        discounts: Vec::new(),
    };
    model.rebuild_derived();
    Ok(model)
}

fn is_reserved(token: &str) -> bool {
    token == BOS || token == EOS || token == UNK
}

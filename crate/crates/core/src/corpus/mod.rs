//! Core corpus types: token sequences, utterances, dialogue sessions, plus
//! tokenization, JSONL I/O, and streaming statistics.

mod io;
mod stats;
mod tokenize;

pub use io::{
    collect_sessions, load_line_list, read_sessions, write_sessions, CorpusFormat, SessionReader,
    SessionWriter,
};
pub use stats::{corpus_stats, corpus_stats_file, CorpusStats, StatsAccumulator};
pub use tokenize::{is_punctuation, Tokenizer, TokenizerConfig, TokenizerMode};

use std::borrow::Cow;
use std::ops::Deref;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered sequence of tokens. Empty tokens are filtered out on
/// construction, so the sequence never contains the empty string.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<String>")]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        if tokens.iter().any(String::is_empty) {
            TokenSeq(tokens.into_iter().filter(|t| !t.is_empty()).collect())
        } else {
            TokenSeq(tokens)
        }
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl From<Vec<String>> for TokenSeq {
    fn from(tokens: Vec<String>) -> Self {
        TokenSeq::new(tokens)
    }
}

impl FromIterator<String> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        TokenSeq::new(iter.into_iter().collect())
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// A single utterance: raw text plus a lazily computed token cache.
///
/// The cache remembers the fingerprint of the tokenizer that filled it; a
/// lookup with a differently configured tokenizer recomputes from scratch
/// instead of returning stale tokens.
#[derive(Clone)]
pub struct Utterance {
    text: String,
    cache: OnceLock<(u64, TokenSeq)>,
}

impl Utterance {
    /// Create an utterance. The text must contain at least one
    /// non-whitespace character.
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Config("utterance text must not be empty".into()));
        }
        Ok(Utterance { text, cache: OnceLock::new() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Tokenize the utterance, caching the result for the first tokenizer
    /// configuration seen.
    pub fn tokens(&self, tokenizer: &Tokenizer) -> Cow<'_, TokenSeq> {
        let (fp, cached) =
            self.cache.get_or_init(|| (tokenizer.fingerprint(), tokenizer.tokenize(&self.text)));
        if *fp == tokenizer.fingerprint() {
            Cow::Borrowed(cached)
        } else {
            Cow::Owned(tokenizer.tokenize(&self.text))
        }
    }
}

impl std::fmt::Debug for Utterance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("Utterance").field(&self.text).finish()
    }
}

impl PartialEq for Utterance {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for Utterance {}

/// A context/response view over a session: every utterance except the last,
/// plus the last utterance as the response.
#[derive(Clone, Copy, Debug)]
pub struct ContextResponsePair<'a> {
    pub context: &'a [Utterance],
    pub response: &'a Utterance,
}

/// A dialogue session: an ordered list of utterances with a stable id and a
/// source/dataset tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DialogueSession {
    id: String,
    source: String,
    utterances: Vec<Utterance>,
}

impl DialogueSession {
    /// Create a session. Requires a non-empty id, source, and at least one
    /// utterance.
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        utterances: Vec<Utterance>,
    ) -> Result<Self> {
        let id = id.into();
        let source = source.into();
        if id.is_empty() {
            return Err(Error::Config("session id must not be empty".into()));
        }
        if source.is_empty() {
            return Err(Error::Config("session source must not be empty".into()));
        }
        if utterances.is_empty() {
            return Err(Error::Config(format!("session {id} has no utterances")));
        }
        Ok(DialogueSession { id, source, utterances })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Every utterance except the last. Empty for single-utterance sessions.
    pub fn context(&self) -> &[Utterance] {
        &self.utterances[..self.utterances.len() - 1]
    }

    /// The context/response split, if the session has at least two
    /// utterances.
    pub fn pair(&self) -> Option<ContextResponsePair<'_>> {
        if self.utterances.len() < 2 {
            return None;
        }
        Some(ContextResponsePair {
            context: self.context(),
            response: self.utterances.last().expect("non-empty session"),
        })
    }

    /// Clone of this session with the utterance list replaced (used by text
    /// normalization, which must keep id and source intact).
    pub fn with_utterances(&self, utterances: Vec<Utterance>) -> Result<Self> {
        DialogueSession::new(self.id.clone(), self.source.clone(), utterances)
    }
}

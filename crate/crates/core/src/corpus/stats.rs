//! Corpus-level statistics with associative accumulation, so shards counted
//! independently merge into the same totals as one pass over the whole
//! stream.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_sessions, CorpusFormat, DialogueSession, Tokenizer};
use crate::error::{Error, Result};

/// Summary statistics for a corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_sessions: u64,
    pub n_utterances: u64,
    pub n_tokens: u64,
    pub avg_utterances_per_session: f64,
    pub avg_tokens_per_utterance: f64,
    /// Size of the corpus on disk. Zero when the stats were computed from
    /// in-memory sessions rather than a file.
    pub bytes_on_disk: u64,
}

/// Running counters behind [`CorpusStats`]. Counters are plain sums, so any
/// partition of the input merges to the same result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StatsAccumulator {
    sessions: u64,
    utterances: u64,
    tokens: u64,
    bytes: u64,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        StatsAccumulator::default()
    }

    pub fn add_session(&mut self, session: &DialogueSession, tokenizer: &Tokenizer) {
        self.sessions += 1;
        self.utterances += session.utterances().len() as u64;
        for utterance in session.utterances() {
            self.tokens += utterance.tokens(tokenizer).len() as u64;
        }
    }

    /// Account for raw bytes consumed from disk.
    pub fn add_bytes(&mut self, n: u64) {
        self.bytes += n;
    }

    /// Combine two partial counts (e.g. from independently processed shards).
    pub fn merge(&mut self, other: &StatsAccumulator) {
        self.sessions += other.sessions;
        self.utterances += other.utterances;
        self.tokens += other.tokens;
        self.bytes += other.bytes;
    }

    /// Finalize. Errors if no sessions were counted, since the averages
    /// would be meaningless.
    pub fn finish(&self) -> Result<CorpusStats> {
        if self.sessions == 0 {
            return Err(Error::EmptyStream);
        }
        Ok(CorpusStats {
            n_sessions: self.sessions,
            n_utterances: self.utterances,
            n_tokens: self.tokens,
            avg_utterances_per_session: self.utterances as f64 / self.sessions as f64,
            avg_tokens_per_utterance: if self.utterances == 0 {
                0.0
            } else {
                self.tokens as f64 / self.utterances as f64
            },
            bytes_on_disk: self.bytes,
        })
    }
}

/// Statistics over in-memory sessions (`bytes_on_disk` is 0).
pub fn corpus_stats<'a>(
    sessions: impl IntoIterator<Item = &'a DialogueSession>,
    tokenizer: &Tokenizer,
) -> Result<CorpusStats> {
    let mut acc = StatsAccumulator::new();
    for session in sessions {
        acc.add_session(session, tokenizer);
    }
    acc.finish()
}

/// Streaming statistics over a corpus file; memory stays flat in the file
/// size. In lenient mode malformed records are logged and skipped.
pub fn corpus_stats_file(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    tokenizer: &Tokenizer,
    strict: bool,
) -> Result<CorpusStats> {
    let path = path.as_ref();
    let mut reader = read_sessions(path, format, strict)?;
    let mut acc = StatsAccumulator::new();
    while let Some(item) = reader.next() {
        match item {
            Ok(session) => acc.add_session(&session, tokenizer),
            Err(e) if !strict => log::warn!("{}: skipping record: {e}", path.display()),
            Err(e) => return Err(e),
        }
    }
    acc.add_bytes(reader.bytes_read());
    acc.finish()
}

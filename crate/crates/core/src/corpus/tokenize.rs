//! Tokenization: character, whitespace, and external-vocabulary modes.

use std::collections::HashSet;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::TokenSeq;
use crate::error::{Error, Result};

/// How text is split into tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerMode {
    /// One token per non-whitespace character. The natural choice for
    /// Chinese text and the default everywhere in this crate.
    #[default]
    Char,
    /// Split on Unicode whitespace.
    Whitespace,
    /// Greedy longest-match against a fixed vocabulary file (one entry per
    /// line); characters not starting any vocabulary entry become
    /// single-character tokens.
    ExternalVocab,
}

/// Declarative tokenizer settings, as they appear in config files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub mode: TokenizerMode,
    /// Lowercase the text before splitting.
    pub lowercase: bool,
    /// Drop tokens that consist entirely of punctuation. Metric tokenization
    /// enables this so surface punctuation does not inflate overlap scores.
    pub strip_punct_for_metrics: bool,
    /// Vocabulary file for [`TokenizerMode::ExternalVocab`].
    pub vocab_path: Option<PathBuf>,
}

/// A compiled tokenizer. Construction loads the external vocabulary (if any)
/// once, so `tokenize` itself never touches the filesystem.
#[derive(Debug)]
pub struct Tokenizer {
    mode: CompiledMode,
    lowercase: bool,
    strip_punct: bool,
    fingerprint: u64,
}

#[derive(Debug)]
enum CompiledMode {
    Char,
    Whitespace,
    Vocab { entries: HashSet<String>, max_chars: usize },
}

impl Tokenizer {
    pub fn new(config: &TokenizerConfig) -> Result<Self> {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        config.mode.hash(&mut hasher);
        config.lowercase.hash(&mut hasher);
        config.strip_punct_for_metrics.hash(&mut hasher);

        let mode = match config.mode {
            TokenizerMode::Char => CompiledMode::Char,
            TokenizerMode::Whitespace => CompiledMode::Whitespace,
            TokenizerMode::ExternalVocab => {
                let path = config.vocab_path.as_ref().ok_or_else(|| {
                    Error::Config("external-vocab tokenizer requires vocab_path".into())
                })?;
                let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let mut entries = HashSet::new();
                let mut max_chars = 1;
                for line in raw.lines() {
                    let entry = line.trim_end_matches('\r');
                    if entry.is_empty() {
                        continue;
                    }
                    entry.hash(&mut hasher);
                    max_chars = max_chars.max(entry.chars().count());
                    entries.insert(entry.to_string());
                }
                if entries.is_empty() {
                    return Err(Error::Config(format!(
                        "external vocabulary {} is empty",
                        path.display()
                    )));
                }
                CompiledMode::Vocab { entries, max_chars }
            }
        };

        Ok(Tokenizer {
            mode,
            lowercase: config.lowercase,
            strip_punct: config.strip_punct_for_metrics,
            fingerprint: hasher.finish(),
        })
    }

    /// Character tokenizer with default flags.
    pub fn char_mode() -> Self {
        Tokenizer::new(&TokenizerConfig::default()).expect("char tokenizer is infallible")
    }

    /// Stable identity of this configuration, used to key token caches.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn tokenize(&self, text: &str) -> TokenSeq {
        let owned;
        let text = if self.lowercase {
            owned = text.to_lowercase();
            &owned
        } else {
            text
        };

        let tokens: Vec<String> = match &self.mode {
            CompiledMode::Char => {
                text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
            }
            CompiledMode::Whitespace => text.split_whitespace().map(String::from).collect(),
            CompiledMode::Vocab { entries, max_chars } => {
                let chars: Vec<char> = text.chars().collect();
                let mut out = Vec::new();
                let mut i = 0;
                while i < chars.len() {
                    if chars[i].is_whitespace() {
                        i += 1;
                        continue;
                    }
                    let limit = (*max_chars).min(chars.len() - i);
                    let mut took = 1;
                    for len in (2..=limit).rev() {
                        let candidate: String = chars[i..i + len].iter().collect();
                        if entries.contains(&candidate) {
                            took = len;
                            break;
                        }
                    }
                    out.push(chars[i..i + took].iter().collect());
                    i += took;
                }
                out
            }
        };

        let tokens = if self.strip_punct {
            tokens.into_iter().filter(|t| !t.chars().all(is_punctuation)).collect()
        } else {
            tokens
        };
        TokenSeq::new(tokens)
    }

    /// Join tokens back into display text: space-separated for whitespace
    /// mode, plain concatenation otherwise.
    pub fn detokenize(&self, tokens: &[String]) -> String {
        match self.mode {
            CompiledMode::Whitespace => tokens.join(" "),
            _ => tokens.concat(),
        }
    }
}

/// Punctuation test covering ASCII plus the common CJK and fullwidth ranges.
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii_punctuation() {
        return true;
    }
    matches!(c as u32,
        0x00B7                      // middle dot
        | 0x2000..=0x206F           // general punctuation (…, —, quotes)
        | 0x2E00..=0x2E7F           // supplemental punctuation
        | 0x3001..=0x303F           // CJK symbols and punctuation (、。《》「」)
        | 0xFE30..=0xFE4F           // CJK compatibility forms
        | 0xFE50..=0xFE6F           // small form variants
        | 0xFF01..=0xFF0F           // fullwidth ！＂＃…／
        | 0xFF1A..=0xFF20           // fullwidth ：；＜…＠
        | 0xFF3B..=0xFF40           // fullwidth ［＼…｀
        | 0xFF5B..=0xFF65           // fullwidth ｛｜｝～…halfwidth 。「」
    )
}

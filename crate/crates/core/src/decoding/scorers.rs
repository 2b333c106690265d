//! Bundled [`SequenceScorer`] implementations: a prefix-keyed lookup table
//! (exact, handy for tests and tiny demos) and an adapter over a trained
//! n-gram language model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::{SequenceScorer, DEFAULT_EOD};
use crate::error::{Error, Result};
use crate::ngram::{NGramLM, EOS};

/// A scorer backed by an explicit table of next-token distributions.
///
/// Each row maps a generated prefix to a distribution over the vocabulary;
/// a row with no prefix is the default used whenever no exact row matches.
/// The conversational context is ignored — the table is keyed on the
/// generated prefix alone. The vocabulary is the sorted union of every
/// token mentioned by any row, and must include the end marker.
#[derive(Debug)]
pub struct TableScorer {
    vocab: Vec<String>,
    rows: HashMap<Vec<String>, Vec<f64>>,
    default_row: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RowRecord {
    #[serde(default)]
    prefix: Option<Vec<String>>,
    dist: BTreeMap<String, f64>,
}

/// How far a row's probabilities may drift from summing to one before the
/// row is rejected rather than renormalized.
const ROW_SUM_TOLERANCE: f64 = 1e-6;

impl TableScorer {
    /// Build a scorer from `(prefix, distribution)` rows. `None` marks the
    /// default row. Rows must be non-negative, finite, and sum to one
    /// within a small tolerance; accepted rows are renormalized exactly.
    pub fn from_rows(
        rows: impl IntoIterator<Item = (Option<Vec<String>>, BTreeMap<String, f64>)>,
    ) -> Result<Self> {
        let rows: Vec<(Option<Vec<String>>, BTreeMap<String, f64>)> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::Scorer("scorer table has no rows".into()));
        }
        let vocab: Vec<String> = rows
            .iter()
            .flat_map(|(_, dist)| dist.keys().cloned())
            .collect::<BTreeSet<String>>()
            .into_iter()
            .collect();
        if vocab.iter().any(String::is_empty) {
            return Err(Error::Scorer("scorer table contains an empty token".into()));
        }
        if !vocab.iter().any(|t| t == DEFAULT_EOD) {
            return Err(Error::Scorer(format!(
                "scorer table never mentions the end marker {DEFAULT_EOD:?}"
            )));
        }
        let index: HashMap<&str, usize> =
            vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

        let mut table = TableScorer { vocab: vocab.clone(), rows: HashMap::new(), default_row: None };
        for (prefix, dist) in rows {
            let mut aligned = vec![0.0; vocab.len()];
            let mut sum = 0.0;
            for (token, p) in &dist {
                if !p.is_finite() || *p < 0.0 {
                    return Err(Error::Scorer(format!(
                        "row for prefix {prefix:?} gives {token:?} probability {p}"
                    )));
                }
                aligned[index[token.as_str()]] = *p;
                sum += *p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Scorer(format!(
                    "row for prefix {prefix:?} sums to {sum}"
                )));
            }
            for p in &mut aligned {
                *p /= sum;
            }
            match prefix {
                None => {
                    if table.default_row.replace(aligned).is_some() {
                        return Err(Error::Scorer("duplicate default row".into()));
                    }
                }
                Some(prefix) => {
                    if table.rows.insert(prefix.clone(), aligned).is_some() {
                        return Err(Error::Scorer(format!("duplicate row for prefix {prefix:?}")));
                    }
                }
            }
        }
        Ok(table)
    }

    /// Parse newline-delimited JSON rows:
    /// `{"prefix": ["a"], "dist": {"b": 0.5, "<EOD>": 0.5}}`, with a
    /// missing or null prefix marking the default row. Blank lines are
    /// skipped.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::record(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RowRecord = serde_json::from_str(&line)
                .map_err(|e| Error::record(line_no, e.to_string()))?;
            rows.push((record.prefix, record.dist));
        }
        Self::from_rows(rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

impl SequenceScorer for TableScorer {
    fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn next_dist(&self, _context: &[String], prefix: &[String]) -> Result<Vec<f64>> {
        if let Some(row) = self.rows.get(prefix) {
            return Ok(row.clone());
        }
        self.default_row.clone().ok_or_else(|| {
            Error::Scorer(format!("no row for prefix {prefix:?} and no default row"))
        })
    }
}

/// A scorer that reads next-token distributions off a trained n-gram
/// language model. The model's end-of-sequence marker doubles as the
/// end-of-turn marker, so generation stops where the model would end a
/// sequence.
pub struct LmScorer {
    lm: Arc<NGramLM>,
}

impl LmScorer {
    pub fn new(lm: Arc<NGramLM>) -> Self {
        LmScorer { lm }
    }
}

impl SequenceScorer for LmScorer {
    fn vocab(&self) -> &[String] {
        self.lm.vocab()
    }

    fn eod_token(&self) -> &str {
        EOS
    }

    fn next_dist(&self, context: &[String], prefix: &[String]) -> Result<Vec<f64>> {
        let need = self.lm.order().saturating_sub(1);
        let bos = self.lm.token_id(crate::ngram::BOS);
        let recent: Vec<u32> = context
            .iter()
            .chain(prefix.iter())
            .map(|t| self.lm.token_id(t))
            .collect();
        let mut history: Vec<u32> = Vec::with_capacity(need);
        if recent.len() < need {
            history.extend(std::iter::repeat_n(bos, need - recent.len()));
            history.extend_from_slice(&recent);
        } else {
            history.extend_from_slice(&recent[recent.len() - need..]);
        }
        Ok((0..self.lm.vocab().len() as u32)
            .map(|id| self.lm.cond_prob_ids(&history, id))
            .collect())
    }
}

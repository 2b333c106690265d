//! A staged cleaning pipeline for dialogue corpora.
//!
//! Sessions pass through four gates in a fixed order:
//!
//! 1. **dataset** — drop whole sources known to be noisy;
//! 2. **rule** — normalize text (character mapping, punctuation-run
//!    collapsing) and drop sessions matching blacklisted terms;
//! 3. **classifier** — drop sessions whose combined quality score falls
//!    below a per-source threshold;
//! 4. **context** — cap how many responses any single context may keep,
//!    retaining the highest-scoring ones.
//!
//! The first three gates are independent per session and run in parallel;
//! the context gate needs a global view and runs last. Every rejection
//! records the gate that fired and a human-readable reason.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_punctuation, DialogueSession, Tokenizer, Utterance};
use crate::error::{Error, Result};
use crate::exec;
use crate::quality::{normalize_for_match, QualityReport};

/// The pipeline gate that rejected a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterStage {
    Dataset,
    Rule,
    Classifier,
    Context,
}

impl fmt::Display for FilterStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FilterStage::Dataset => "dataset",
            FilterStage::Rule => "rule",
            FilterStage::Classifier => "classifier",
            FilterStage::Context => "context",
        };
        f.write_str(name)
    }
}

/// Verdict of a single gate: kept, or rejected with a stage and reason.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterOutcome {
    stage: Option<FilterStage>,
    detail: String,
}

impl FilterOutcome {
    pub fn kept() -> Self {
        FilterOutcome { stage: None, detail: String::new() }
    }

    pub fn rejected(stage: FilterStage, detail: impl Into<String>) -> Self {
        FilterOutcome { stage: Some(stage), detail: detail.into() }
    }

    pub fn is_kept(&self) -> bool {
        self.stage.is_none()
    }

    pub fn stage(&self) -> Option<FilterStage> {
        self.stage
    }

    pub fn detail(&self) -> &str {
        &self.detail
    }
}

/// One rejected session: which one, where, and why.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub id: String,
    pub stage: FilterStage,
    pub detail: String,
}

/// Tunables for the whole pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Sources dropped wholesale at the dataset gate.
    pub excluded_sources: HashSet<String>,
    /// Cap on responses kept per distinct context; `None` lifts the cap.
    pub max_responses_per_context: Option<usize>,
    /// Terms that reject a session when any utterance contains one
    /// (matched width- and case-insensitively).
    pub blacklist: Vec<String>,
    /// Character rewrites applied before any other rule, e.g. a
    /// traditional-to-simplified table.
    pub char_map: HashMap<char, char>,
    /// Longest run of one repeated punctuation character to keep; longer
    /// runs are shortened to this length.
    pub punct_run_max: usize,
    /// Per-source minimum combined quality score.
    pub per_source_thresholds: HashMap<String, f64>,
    /// Fallback threshold for sources missing from the map. With neither
    /// a per-source nor a default threshold, the classifier gate is a
    /// configuration error.
    pub default_threshold: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            excluded_sources: HashSet::new(),
            max_responses_per_context: Some(10),
            blacklist: Vec::new(),
            char_map: HashMap::new(),
            punct_run_max: 3,
            per_source_thresholds: HashMap::new(),
            default_threshold: None,
        }
    }
}

impl FilterConfig {
    /// A configuration under which every session passes untouched (apart
    /// from the rule gate's rebuild, which leaves text byte-identical).
    pub fn identity() -> Self {
        FilterConfig {
            max_responses_per_context: None,
            punct_run_max: usize::MAX,
            default_threshold: Some(f64::NEG_INFINITY),
            ..FilterConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.punct_run_max == 0 {
            return Err(Error::Config("punct_run_max must be at least 1".into()));
        }
        if self.max_responses_per_context == Some(0) {
            return Err(Error::Config(
                "max_responses_per_context must be at least 1 (use null for no cap)".into(),
            ));
        }
        for (source, threshold) in &self.per_source_thresholds {
            if threshold.is_nan() {
                return Err(Error::Config(format!("threshold for {source:?} is NaN")));
            }
        }
        if self.default_threshold.is_some_and(f64::is_nan) {
            return Err(Error::Config("default threshold is NaN".into()));
        }
        if self.blacklist.iter().any(|t| normalize_for_match(t).trim().is_empty()) {
            return Err(Error::Config("blacklist contains a blank term".into()));
        }
        Ok(())
    }
}

/// Load a character-rewrite table from a tab-separated file: one
/// `from<TAB>to` pair per line, `#` comments and blank lines skipped.
pub fn load_char_map(path: impl AsRef<Path>) -> Result<HashMap<char, char>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (from, to) = line
            .split_once('\t')
            .ok_or_else(|| Error::record(line_no, "expected two tab-separated fields"))?;
        let parse = |field: &str| -> Result<char> {
            let mut chars = field.trim().chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::record(line_no, format!("{field:?} is not a single character"))),
            }
        };
        let from = parse(from)?;
        let to = parse(to)?;
        if map.insert(from, to).is_some() {
            return Err(Error::record(line_no, format!("duplicate mapping for {from:?}")));
        }
    }
    Ok(map)
}

/// Dataset gate: reject sessions from excluded sources.
pub fn dataset_filter(session: &DialogueSession, config: &FilterConfig) -> FilterOutcome {
    if config.excluded_sources.contains(session.source()) {
        FilterOutcome::rejected(
            FilterStage::Dataset,
            format!("source {:?} is excluded", session.source()),
        )
    } else {
        FilterOutcome::kept()
    }
}

fn collapse_punct_runs(text: &str, max_run: usize) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for ch in text.chars() {
        if prev == Some(ch) && is_punctuation(ch) {
            run += 1;
            if run > max_run {
                continue;
            }
        } else {
            prev = Some(ch);
            run = 1;
        }
        out.push(ch);
    }
    out
}

/// Rule gate: rewrite characters, shorten punctuation runs, then reject
/// sessions containing blacklisted terms. Returns the normalized session
/// alongside the verdict; the normalized form is what later gates (and
/// the kept output) should use.
pub fn rule_filter(
    session: &DialogueSession,
    config: &FilterConfig,
) -> (DialogueSession, FilterOutcome) {
    let mut normalized: Vec<Utterance> = Vec::with_capacity(session.len());
    for utterance in session.utterances() {
        let mut text: String = if config.char_map.is_empty() {
            utterance.text().to_string()
        } else {
            utterance.text().chars().map(|c| *config.char_map.get(&c).unwrap_or(&c)).collect()
        };
        text = collapse_punct_runs(&text, config.punct_run_max);
        match Utterance::new(text) {
            Ok(utterance) => normalized.push(utterance),
            Err(_) => {
                return (
                    session.clone(),
                    FilterOutcome::rejected(
                        FilterStage::Rule,
                        "utterance became blank after normalization",
                    ),
                );
            }
        }
    }

    for term in &config.blacklist {
        let needle = normalize_for_match(term);
        if needle.is_empty() {
            continue;
        }
        for utterance in &normalized {
            if normalize_for_match(utterance.text()).contains(&needle) {
                return (
                    session.clone(),
                    FilterOutcome::rejected(
                        FilterStage::Rule,
                        format!("utterance matches blacklisted term {term:?}"),
                    ),
                );
            }
        }
    }

    match session.with_utterances(normalized) {
        Ok(rebuilt) => (rebuilt, FilterOutcome::kept()),
        Err(_) => (
            session.clone(),
            FilterOutcome::rejected(FilterStage::Rule, "session emptied by normalization"),
        ),
    }
}

/// Classifier gate: compare the combined quality score against the
/// session's threshold (per-source, falling back to the default). Scores
/// equal to the threshold are kept.
pub fn classifier_filter(
    session: &DialogueSession,
    report: &QualityReport,
    config: &FilterConfig,
) -> Result<FilterOutcome> {
    let threshold = config
        .per_source_thresholds
        .get(session.source())
        .copied()
        .or(config.default_threshold)
        .ok_or_else(|| {
            Error::Config(format!("no quality threshold for source {:?}", session.source()))
        })?;
    if report.combined >= threshold {
        Ok(FilterOutcome::kept())
    } else {
        Ok(FilterOutcome::rejected(
            FilterStage::Classifier,
            format!("combined score {:.4} below threshold {threshold:.4}", report.combined),
        ))
    }
}

/// Tokenized context of a session, flattened to an exact string key.
/// Tokens are joined with one unprintable separator and utterances with
/// another, so distinct contexts can never collide.
fn context_key(session: &DialogueSession, tokenizer: &Tokenizer) -> String {
    let parts: Vec<String> = session
        .context()
        .iter()
        .map(|u| u.tokens(tokenizer).join("\u{1}"))
        .collect();
    parts.join("\u{2}")
}

/// Everything the pipeline produced: surviving sessions in input order,
/// their quality reports, and one record per rejection.
#[derive(Debug)]
pub struct PipelineOutput {
    pub kept: Vec<DialogueSession>,
    pub kept_reports: Vec<QualityReport>,
    pub rejections: Vec<Rejection>,
}

enum Staged {
    Rejected { id: String, stage: FilterStage, detail: String },
    Survived { session: DialogueSession, report: QualityReport },
}

/// Run all four gates over `sessions`.
///
/// `score` computes the quality report for a session that has already
/// passed the rule gate (so it sees normalized text). The per-session
/// gates fan out across `workers`; results are identical for any worker
/// count. Sessions with fewer than two utterances have no
/// context/response pair and are exempt from the context cap.
pub fn run_pipeline(
    sessions: Vec<DialogueSession>,
    config: &FilterConfig,
    tokenizer: &Tokenizer,
    score: impl Fn(&DialogueSession) -> Result<QualityReport> + Sync,
    workers: usize,
) -> Result<PipelineOutput> {
    config.validate()?;

    let staged: Vec<Staged> = exec::try_map_ordered(&sessions, workers, |session| {
        let reject = |outcome: FilterOutcome| Staged::Rejected {
            id: session.id().to_string(),
            stage: outcome.stage().expect("rejected outcome has a stage"),
            detail: outcome.detail().to_string(),
        };
        let outcome = dataset_filter(session, config);
        if !outcome.is_kept() {
            return Ok(reject(outcome));
        }
        let (normalized, outcome) = rule_filter(session, config);
        if !outcome.is_kept() {
            return Ok(reject(outcome));
        }
        let report = score(&normalized)?;
        let outcome = classifier_filter(&normalized, &report, config)?;
        if !outcome.is_kept() {
            return Ok(reject(outcome));
        }
        Ok(Staged::Survived { session: normalized, report })
    })?;

    // Context gate: group survivors by exact context and keep the best
    // `cap` in each group, favouring earlier input on ties.
    let mut context_dropped: HashMap<usize, String> = HashMap::new();
    if let Some(cap) = config.max_responses_per_context {
        let mut groups: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for (idx, item) in staged.iter().enumerate() {
            if let Staged::Survived { session, report } = item {
                if session.len() >= 2 {
                    groups
                        .entry(context_key(session, tokenizer))
                        .or_default()
                        .push((idx, report.combined));
                }
            }
        }
        for members in groups.into_values() {
            if members.len() <= cap {
                continue;
            }
            let mut ranked = members;
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for &(idx, combined) in &ranked[cap..] {
                context_dropped.insert(
                    idx,
                    format!(
                        "context already has {cap} responses scoring at least {combined:.4}"
                    ),
                );
            }
        }
    }

    let mut output = PipelineOutput {
        kept: Vec::new(),
        kept_reports: Vec::new(),
        rejections: Vec::new(),
    };
    for (idx, item) in staged.into_iter().enumerate() {
        match item {
            Staged::Rejected { id, stage, detail } => {
                output.rejections.push(Rejection { id, stage, detail });
            }
            Staged::Survived { session, report } => match context_dropped.remove(&idx) {
                Some(detail) => output.rejections.push(Rejection {
                    id: session.id().to_string(),
                    stage: FilterStage::Context,
                    detail,
                }),
                None => {
                    output.kept.push(session);
                    output.kept_reports.push(report);
                }
            },
        }
    }
    Ok(output)
}

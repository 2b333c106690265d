//! Layered tool configuration.
//!
//! Settings resolve in order: compiled defaults, then an optional TOML
//! file (`--config`), then `DIALOKIT_*` environment variables, then
//! command-line flags (applied by each subcommand). Environment variables
//! address nested fields with a double underscore — `DIALOKIT_DECODE__SEED=7`
//! sets `decode.seed` — and values are parsed as TOML fragments, falling
//! back to plain strings.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use dialokit_core::corpus::{load_line_list, Tokenizer, TokenizerConfig};
use dialokit_core::decoding::DecodeConfig;
use dialokit_core::filters::{load_char_map, FilterConfig};
use dialokit_core::ngram::LmConfig;
use dialokit_core::quality::{QualityWeights, StarList, DEFAULT_S2_FLOOR};

pub const ENV_PREFIX: &str = "DIALOKIT_";
pub const ENV_SEPARATOR: &str = "__";

/// Everything the tool can be told through a config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub tokenizer: TokenizerConfig,
    pub weights: QualityWeights,
    pub relevance: RelevanceSection,
    pub filter: FilterConfig,
    pub lm: LmConfig,
    pub decode: DecodeConfig,
    pub paths: PathsSection,
}

/// Knobs for the relevance signals.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceSection {
    /// Exponent on the context-distance weight of the lexical signal.
    pub tau: f64,
    /// Count each (token type, context utterance) match once instead of
    /// multiplying occurrence counts.
    pub dedupe_pairs: bool,
    /// Lower clamp on the classifier signal's log-probability.
    pub s2_floor: f64,
}

impl Default for RelevanceSection {
    fn default() -> Self {
        RelevanceSection { tau: 1.0, dedupe_pairs: false, s2_floor: DEFAULT_S2_FLOOR }
    }
}

impl RelevanceSection {
    pub fn params(&self) -> dialokit_core::quality::RelevanceParams {
        dialokit_core::quality::RelevanceParams { tau: self.tau, dedupe_pairs: self.dedupe_pairs }
    }
}

/// External files the tool may need. Everything is optional; commands
/// that need a file complain when it is missing.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Trained language model, used for fluency scoring and as the
    /// default decode scorer.
    pub model: Option<PathBuf>,
    /// Blacklist terms (one per line), appended to `filter.blacklist`.
    pub blacklist: Option<PathBuf>,
    /// Celebrity names (one per line) for the entertainment flag.
    pub star_list: Option<PathBuf>,
    /// Character rewrite table (TSV), merged over `filter.char_map`.
    pub char_map: Option<PathBuf>,
}

impl ToolConfig {
    /// Resolve the configuration from an optional TOML file plus
    /// environment variables (pass `std::env::vars()`; tests inject their
    /// own). Unknown keys anywhere are an error, so typos fail loudly.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> anyhow::Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config file {}", path.display()))?
            }
            None => toml::Table::new(),
        };
        apply_env_overrides(&mut table, env)?;
        let config: ToolConfig =
            toml::Value::Table(table).try_into().context("invalid configuration")?;
        Ok(config)
    }

    /// Tokenizer for corpus processing. The punctuation-stripping option
    /// only concerns metric tokenization, so it is forced off here.
    pub fn data_tokenizer(&self) -> anyhow::Result<Tokenizer> {
        let config = TokenizerConfig { strip_punct_for_metrics: false, ..self.tokenizer.clone() };
        Ok(Tokenizer::new(&config)?)
    }

    /// Tokenizer for metric evaluation, honouring the punctuation-stripping
    /// option as configured.
    pub fn metrics_tokenizer(&self) -> anyhow::Result<Tokenizer> {
        Ok(Tokenizer::new(&self.tokenizer)?)
    }

    /// The filter settings with list files merged in: `paths.blacklist`
    /// entries are appended, `paths.char_map` entries override inline ones.
    pub fn filter_config(&self) -> anyhow::Result<FilterConfig> {
        let mut filter = self.filter.clone();
        if let Some(path) = &self.paths.blacklist {
            filter.blacklist.extend(load_line_list(path)?);
        }
        if let Some(path) = &self.paths.char_map {
            for (from, to) in load_char_map(path)? {
                filter.char_map.insert(from, to);
            }
        }
        Ok(filter)
    }

    pub fn star_list(&self) -> anyhow::Result<StarList> {
        Ok(match &self.paths.star_list {
            Some(path) => StarList::from_path(path)?,
            None => StarList::default(),
        })
    }
}

/// Parse an override value as a TOML fragment (`42`, `true`, `1.5`,
/// `["a"]`, `"x"`), falling back to a plain string for anything that does
/// not parse, so `DIALOKIT_LM__SMOOTHING__KIND=kneser-ney` works unquoted.
fn parse_env_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").expect("wrapper key is present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Fold `DIALOKIT_*` variables into a TOML table. Overrides apply in
/// sorted key order, so the result never depends on enumeration order.
fn apply_env_overrides(
    table: &mut toml::Table,
    env: impl IntoIterator<Item = (String, String)>,
) -> anyhow::Result<()> {
    let mut vars: Vec<(String, String)> =
        env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let parts: Vec<String> = key[ENV_PREFIX.len()..]
            .split(ENV_SEPARATOR)
            .map(str::to_ascii_lowercase)
            .collect();
        if parts.iter().any(String::is_empty) {
            anyhow::bail!("malformed override variable {key:?}");
        }
        let (last, ancestors) = parts.split_last().expect("split produces at least one part");
        let mut node = &mut *table;
        for part in ancestors {
            node = node
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    anyhow::anyhow!("override {key:?} descends into non-table field {part:?}")
                })?;
        }
        node.insert(last.clone(), parse_env_value(&raw));
    }
    Ok(())
}

/// The machine-readable schema printed by `--config-schema`: override
/// syntax plus every default value.
pub fn schema_json() -> serde_json::Value {
    serde_json::json!({
        "env_prefix": ENV_PREFIX,
        "separator": ENV_SEPARATOR,
        "defaults": ToolConfig::default(),
    })
}

//! Run configuration: defaults, a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::features::{default_reference_date, SplitSpec};
use crate::gbdt::GbdtConfig;
use crate::llm::EndpointConfig;
use crate::prompt::{PromptVariant, DEFAULT_MAX_TOKENS};
use crate::synth::NoiseMode;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub mapping: Option<PathBuf>,
    pub strict_ingest: bool,
    pub reference_date: NaiveDate,
    pub executive_titles: Option<PathBuf>,
    /// Root of every stage seed.
    pub seed: u64,
    /// Explicit per-stage seeds, keyed by stage name.
    pub stage_seeds: BTreeMap<String, u64>,
    pub split: SplitSpec,
    pub balance: bool,
    pub variant: PromptVariant,
    pub budget: usize,
    pub leakage_guard: bool,
    pub include_description: bool,
    pub templates: Option<PathBuf>,
    pub fewshot_k: Vec<usize>,
    pub manifest_overrides: Vec<(String, String)>,
    pub endpoint: EndpointConfig,
    pub regime: String,
    pub gbdt: GbdtConfig,
    pub synth_n: Option<usize>,
    pub synth_mode: Option<NoiseMode>,
    pub synth_config: Option<PathBuf>,
    pub embeddings_fixture: Option<PathBuf>,
    pub embeddings_url: Option<String>,
    pub idf: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: "data".into(),
            out_dir: "out".into(),
            mapping: None,
            strict_ingest: false,
            reference_date: default_reference_date(),
            executive_titles: None,
            seed: 0,
            stage_seeds: BTreeMap::new(),
            split: SplitSpec::default(),
            balance: true,
            variant: PromptVariant::V4,
            budget: DEFAULT_MAX_TOKENS,
            leakage_guard: true,
            include_description: true,
            templates: None,
            fewshot_k: Vec::new(),
            manifest_overrides: Vec::new(),
            endpoint: EndpointConfig::default(),
            regime: "zero-shot".into(),
            gbdt: GbdtConfig::default(),
            synth_n: None,
            synth_mode: None,
            synth_config: None,
            embeddings_fixture: None,
            embeddings_url: None,
            idf: false,
        }
    }
}

/// Every recognised key, in documentation order. `seed.<stage>` and
/// `manifest.<path>` are open families on top of these.
pub const KEYS: &[&str] = &[
    "data_dir",
    "out_dir",
    "mapping",
    "strict_ingest",
    "reference_date",
    "executive_titles",
    "seed",
    "split.train",
    "split.val",
    "split.test",
    "split.stratified",
    "split.balance",
    "prompt.variant",
    "prompt.budget",
    "prompt.leakage_guard",
    "prompt.include_description",
    "prompt.templates",
    "prompt.fewshot_k",
    "endpoint.base_url",
    "endpoint.model",
    "endpoint.api_key_env",
    "endpoint.temperature",
    "endpoint.max_completion_tokens",
    "endpoint.timeout_secs",
    "endpoint.max_retries",
    "endpoint.max_in_flight",
    "endpoint.backoff_base_ms",
    "eval.regime",
    "gbdt.n_rounds",
    "gbdt.max_depth",
    "gbdt.learning_rate",
    "gbdt.lambda",
    "gbdt.gamma",
    "gbdt.min_child_weight",
    "synth.n_companies",
    "synth.mode",
    "synth.config",
    "score.embeddings",
    "score.embeddings_url",
    "score.idf",
];

/// Stages that draw randomness.
pub const STAGES: &[&str] = &["synth", "balance", "split", "fewshot", "gbdt"];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| usage(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(usage(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

/// Seed for one stage: the first eight bytes of SHA-256 over `"{root}:{stage}"`.
pub fn derive_seed(root: u64, stage: &str) -> u64 {
    let digest = Sha256::digest(format!("{root}:{stage}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

impl RunConfig {
    pub fn stage_seed(&self, stage: &str) -> u64 {
        self.stage_seeds
            .get(stage)
            .copied()
            .unwrap_or_else(|| derive_seed(self.seed, stage))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        if let Some(stage) = key.strip_prefix("seed.") {
            if !STAGES.contains(&stage) {
                return Err(usage(format!("unknown seed stage `{stage}` (stages: {})", STAGES.join(", "))));
            }
            self.stage_seeds.insert(stage.into(), parse(key, value)?);
            return Ok(());
        }
        if let Some(path) = key.strip_prefix("manifest.") {
            self.manifest_overrides.retain(|(k, _)| k != path);
            self.manifest_overrides.push((path.into(), value.into()));
            return Ok(());
        }
        let ep = &mut self.endpoint;
        match key {
            "data_dir" => self.data_dir = value.into(),
            "out_dir" => self.out_dir = value.into(),
            "mapping" => self.mapping = opt_path(value),
            "strict_ingest" => self.strict_ingest = parse_bool(key, value)?,
            "reference_date" => {
                self.reference_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                    .map_err(|_| usage(format!("`{key}`: expected YYYY-MM-DD, got `{value}`")))?
            }
            "executive_titles" => self.executive_titles = opt_path(value),
            "seed" => self.seed = parse(key, value)?,
            "split.train" => self.split.train = parse(key, value)?,
            "split.val" => self.split.val = parse(key, value)?,
            "split.test" => self.split.test = parse(key, value)?,
            "split.stratified" => self.split.stratified = parse_bool(key, value)?,
            "split.balance" => self.balance = parse_bool(key, value)?,
            "prompt.variant" => {
                self.variant = value.parse().map_err(|e: crate::prompt::PromptError| usage(e.to_string()))?
            }
            "prompt.budget" => self.budget = parse(key, value)?,
            "prompt.leakage_guard" => self.leakage_guard = parse_bool(key, value)?,
            "prompt.include_description" => self.include_description = parse_bool(key, value)?,
            "prompt.templates" => self.templates = opt_path(value),
            "prompt.fewshot_k" => self.fewshot_k = parse_list(key, value)?,
            "endpoint.base_url" => ep.base_url = value.into(),
            "endpoint.model" => ep.model = value.into(),
            "endpoint.api_key_env" => ep.api_key_env = value.into(),
            "endpoint.temperature" => ep.temperature = parse(key, value)?,
            "endpoint.max_completion_tokens" => ep.max_completion_tokens = parse(key, value)?,
            "endpoint.timeout_secs" => ep.timeout_secs = parse(key, value)?,
            "endpoint.max_retries" => ep.max_retries = parse(key, value)?,
            "endpoint.max_in_flight" => ep.max_in_flight = parse(key, value)?,
            "endpoint.backoff_base_ms" => ep.backoff_base_ms = parse(key, value)?,
            "eval.regime" => self.regime = value.into(),
            "gbdt.n_rounds" => self.gbdt.n_rounds = parse(key, value)?,
            "gbdt.max_depth" => self.gbdt.max_depth = parse(key, value)?,
            "gbdt.learning_rate" => self.gbdt.learning_rate = parse(key, value)?,
            "gbdt.lambda" => self.gbdt.lambda = parse(key, value)?,
            "gbdt.gamma" => self.gbdt.gamma = parse(key, value)?,
            "gbdt.min_child_weight" => self.gbdt.min_child_weight = parse(key, value)?,
            "synth.n_companies" => self.synth_n = Some(parse(key, value)?),
            "synth.mode" => {
                self.synth_mode = Some(match value {
                    "deterministic-threshold" => NoiseMode::DeterministicThreshold,
                    "logistic-sampling" => NoiseMode::LogisticSampling,
                    _ => {
                        return Err(usage(format!(
                            "`{key}`: expected deterministic-threshold or logistic-sampling, got `{value}`"
                        )))
                    }
                })
            }
            "synth.config" => self.synth_config = opt_path(value),
            "score.embeddings" => self.embeddings_fixture = opt_path(value),
            "score.embeddings_url" => self.embeddings_url = (!value.is_empty()).then(|| value.to_string()),
            "score.idf" => self.idf = parse_bool(key, value)?,
            _ => return Err(usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file. A key given twice in one file is a conflict.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{origin} line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if let Some(prev) = seen.insert(k.to_string(), n + 1) {
                return Err(usage(format!("{origin} line {}: `{k}` already set on line {prev}", n + 1)));
            }
            self.set(k, v).map_err(|e| usage(format!("{origin} line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Cross-field checks run after every layer is applied.
    pub fn validate(&self) -> Result<(), CliError> {
        self.split
            .validate()
            .map_err(|e| usage(format!("config conflict: {e}")))?;
        self.gbdt.validate().map_err(|e| usage(e.to_string()))?;
        self.endpoint.validate().map_err(|e| usage(e.to_string()))?;
        if self.budget == 0 {
            return Err(usage("prompt.budget must be positive"));
        }
        if self.regime != "zero-shot" && !is_fewshot_regime(&self.regime) {
            return Err(usage(format!(
                "eval.regime must be zero-shot or fewshot-<k>, got `{}`",
                self.regime
            )));
        }
        if self.embeddings_fixture.is_some() && self.embeddings_url.is_some() {
            return Err(usage("config conflict: score.embeddings and score.embeddings_url are both set"));
        }
        Ok(())
    }
}

fn is_fewshot_regime(s: &str) -> bool {
    s.strip_prefix("fewshot-")
        .is_some_and(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()))
}

//! The `smdt.toml` config file. Unknown keys are rejected so typos surface
//! as errors instead of silently falling back to defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use smdt_core::anonymizer::{AnonymizePolicy, Algorithm, DEFAULT_CHUNK_ROWS, DEFAULT_PEPPER_ENV};
use smdt_core::enricher::{EnricherConfig, ProviderKind};
use smdt_core::secret::Secret;
use smdt_core::standardizer::{AdapterRegistry, FieldMapping, ForumAdapter, MicroblogAdapter, SourceFormat};
use smdt_core::store::{Filter, TargetKind};

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub adapters: BTreeMap<String, AdapterSection>,
    pub anonymize: Option<AnonymizeSection>,
    #[serde(default)]
    pub enrichers: BTreeMap<String, EnricherSection>,
}

/// A built-in adapter registered under a new name with its own raw-field
/// mapping, e.g. for CSV exports with different column names.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterSection {
    pub base: String,
    #[serde(default = "jsonl")]
    pub format: SourceFormat,
    #[serde(default)]
    pub mapping: BTreeMap<String, String>,
}

fn jsonl() -> SourceFormat {
    SourceFormat::Jsonl
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnonymizeSection {
    pub src: String,
    pub dst: String,
    /// Name of the environment variable holding the pepper.
    #[serde(default = "pepper_env")]
    pub pepper_env: String,
    #[serde(default = "sha256")]
    pub algorithm: String,
    pub output_hex_len: Option<usize>,
    #[serde(default = "chunk_rows")]
    pub chunk_rows: usize,
    #[serde(default = "yes")]
    pub ask_reinit: bool,
    /// Replaces the default policy when present.
    pub policy: Option<AnonymizePolicy>,
}

fn pepper_env() -> String {
    DEFAULT_PEPPER_ENV.to_string()
}

fn sha256() -> String {
    "SHA256".to_string()
}

fn chunk_rows() -> usize {
    DEFAULT_CHUNK_ROWS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnricherSection {
    pub provider_kind: ProviderKind,
    pub chat_model_id: String,
    pub model_id_postfix: String,
    pub user_template: String,
    #[serde(default)]
    pub system_prompt: String,
    #[serde(default)]
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub only_missing: Option<bool>,
    pub reset_cache: Option<bool>,
    pub batch_size: Option<usize>,
    pub max_tokens: Option<u32>,
    pub target_kind: Option<TargetKind>,
    pub target_filter: Option<Filter>,
    pub parallelism: Option<usize>,
    pub request_timeout_secs: Option<u64>,
    pub mock_response: Option<String>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Invalid(format!("config {}: {e}", path.display())))
    }

    pub fn registry(&self) -> Result<AdapterRegistry, Failure> {
        let mut registry = AdapterRegistry::with_builtins();
        for (name, section) in &self.adapters {
            let mapping = FieldMapping(section.mapping.clone());
            let adapter: Arc<dyn smdt_core::standardizer::Adapter> = match section.base.as_str() {
                "generic_microblog" => Arc::new(MicroblogAdapter::with_mapping(name, section.format, mapping)),
                "generic_forum" => Arc::new(ForumAdapter::with_mapping(name, section.format, mapping)),
                other => {
                    return Err(Failure::Invalid(format!(
                        "adapters.{name}.base: `{other}` is not generic_microblog or generic_forum"
                    )))
                }
            };
            registry.register_adapter(adapter).map_err(|e| Failure::Invalid(format!("adapters.{name}: {e}")))?;
        }
        Ok(registry)
    }
}

impl AnonymizeSection {
    pub fn algorithm(&self) -> Result<Algorithm, Failure> {
        self.algorithm.parse().map_err(|e: smdt_core::anonymizer::AnonymizeError| Failure::Invalid(format!("anonymize.algorithm: {e}")))
    }

    /// Reads the pepper from the configured environment variable.
    pub fn pepper(&self) -> Result<Secret, Failure> {
        Secret::from_env(&self.pepper_env).ok_or_else(|| {
            Failure::Invalid(format!("anonymize: environment variable {} is not set or empty", self.pepper_env))
        })
    }
}

impl EnricherSection {
    pub fn to_config(&self, name: &str) -> Result<EnricherConfig, Failure> {
        let mut c = EnricherConfig::new(self.provider_kind, &self.chat_model_id, &self.model_id_postfix, &self.user_template);
        c.system_prompt = self.system_prompt.clone();
        c.base_url = self.base_url.clone();
        if let Some(var) = &self.api_key_env {
            c.api_key = Some(Secret::from_env(var).ok_or_else(|| {
                Failure::Invalid(format!("enrichers.{name}.api_key_env: environment variable {var} is not set or empty"))
            })?);
        }
        c.only_missing = self.only_missing.unwrap_or(c.only_missing);
        c.reset_cache = self.reset_cache.unwrap_or(c.reset_cache);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.max_tokens = self.max_tokens.unwrap_or(c.max_tokens);
        c.target_kind = self.target_kind.unwrap_or(c.target_kind);
        c.target_filter = self.target_filter.clone();
        c.parallelism = self.parallelism.unwrap_or(c.parallelism);
        if let Some(secs) = self.request_timeout_secs {
            c.request_timeout = std::time::Duration::from_secs(secs);
        }
        c.mock_response = self.mock_response.clone();
        Ok(c)
    }
}

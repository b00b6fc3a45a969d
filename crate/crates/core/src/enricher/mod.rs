//! Model-backed enrichment of stored posts and accounts.
//!
//! A run renders a prompt per target record, sends it to a chat-completion
//! provider and stores the answer as an enrichment row under the model id
//! `chat_model_id:model_id_postfix`. Targets are processed in batches; each
//! batch is written in one transaction once all of its requests finish.

mod provider;
mod template;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Map, Value};

pub use provider::{
    Completion, HttpProvider, MockProvider, Provider, ProviderError, ProviderFailure, ProviderKind, ANTHROPIC_VERSION,
    MAX_ATTEMPTS,
};
pub use template::{placeholders, render_prompt, TemplateError};

use crate::secret::Secret;
use crate::store::{EnrichmentRecord, Filter, Record, StoreError, StoreHandle, TargetKind};
use crate::timestamp::Timestamp;

pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum EnrichError {
    #[error("invalid enricher config: {0}")]
    InvalidConfig(String),
    #[error("provider rejected the credentials (HTTP {status}); run aborted after {committed} stored responses")]
    Auth { status: u16, committed: u64 },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub struct EnricherConfig {
    pub model_id_postfix: String,
    pub chat_model_id: String,
    pub base_url: String,
    pub api_key: Option<Secret>,
    pub provider_kind: ProviderKind,
    pub system_prompt: String,
    pub user_template: String,
    pub only_missing: bool,
    pub batch_size: usize,
    pub reset_cache: bool,
    pub max_tokens: u32,
    pub target_kind: TargetKind,
    pub target_filter: Option<Filter>,
    /// Concurrent requests within one batch.
    pub parallelism: usize,
    /// First retry delay; doubles on each further retry.
    pub retry_base_delay: Duration,
    pub request_timeout: Duration,
    /// MOCK only: fixed answer instead of echoing the prompt.
    pub mock_response: Option<String>,
    /// Timestamp written to created_at/retrieved_at. Defaults to the commit
    /// time of each batch.
    pub run_time: Option<Timestamp>,
}

impl EnricherConfig {
    pub fn new(provider_kind: ProviderKind, chat_model_id: &str, model_id_postfix: &str, user_template: &str) -> Self {
        EnricherConfig {
            model_id_postfix: model_id_postfix.into(),
            chat_model_id: chat_model_id.into(),
            base_url: String::new(),
            api_key: None,
            provider_kind,
            system_prompt: String::new(),
            user_template: user_template.into(),
            only_missing: true,
            batch_size: 10,
            reset_cache: false,
            max_tokens: 256,
            target_kind: TargetKind::Post,
            target_filter: None,
            parallelism: DEFAULT_PARALLELISM,
            retry_base_delay: Duration::from_secs(1),
            request_timeout: Duration::from_secs(120),
            mock_response: None,
            run_time: None,
        }
    }

    pub fn model_id(&self) -> String {
        format!("{}:{}", self.chat_model_id, self.model_id_postfix)
    }

    pub fn validate(&self) -> Result<(), EnrichError> {
        let bad = |m: String| Err(EnrichError::InvalidConfig(m));
        if self.chat_model_id.trim().is_empty() || self.model_id_postfix.trim().is_empty() {
            return bad("chat_model_id and model_id_postfix must be non-empty".into());
        }
        if self.batch_size == 0 || self.parallelism == 0 || self.max_tokens == 0 {
            return bad("batch_size, parallelism and max_tokens must be positive".into());
        }
        let table = self.target_kind.source_table();
        let names = placeholders(&self.user_template).map_err(|e| EnrichError::InvalidConfig(e.to_string()))?;
        for name in names {
            if table.field(&name).is_err() {
                return bad(format!("user_template placeholder `{name}` is not a field of {table}"));
            }
        }
        if let Some(f) = &self.target_filter {
            f.validate(table)?;
        }
        if self.provider_kind != ProviderKind::Mock {
            self.http_provider()?;
        }
        Ok(())
    }

    fn http_provider(&self) -> Result<HttpProvider, EnrichError> {
        HttpProvider::new(
            self.provider_kind,
            &self.base_url,
            self.api_key.clone(),
            self.retry_base_delay,
            self.request_timeout,
        )
        .map_err(EnrichError::InvalidConfig)
    }

    /// The provider described by this config.
    pub fn provider(&self) -> Result<Box<dyn Provider>, EnrichError> {
        Ok(match self.provider_kind {
            ProviderKind::Mock => Box::new(MockProvider { fixed: self.mock_response.clone() }),
            _ => Box::new(self.http_provider()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureDetail {
    pub target_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EnrichReport {
    pub model_id: String,
    pub targets_considered: u64,
    pub targets_skipped_cached: u64,
    pub requests_sent: u64,
    pub responses_stored: u64,
    pub failures: u64,
    pub retries: u64,
    pub batches: u64,
    pub failure_details: Vec<FailureDetail>,
}

impl EnrichReport {
    fn fail(&mut self, target_id: &str, reason: String) {
        self.failures += 1;
        self.failure_details.push(FailureDetail { target_id: target_id.to_string(), reason });
    }
}

/// Latest snapshot of every target record, keyed by id in store order.
fn load_targets(store: &StoreHandle, config: &EnricherConfig) -> Result<IndexMap<String, Map<String, Value>>, StoreError> {
    let table = config.target_kind.source_table();
    let id_field = config.target_kind.id_field();
    let filter = config.target_filter.clone().unwrap_or_default();
    let mut out = IndexMap::new();
    for row in store.query_rows(table, &filter)? {
        if let Some(Value::String(id)) = row.get(id_field) {
            out.insert(id.clone(), row);
        }
    }
    Ok(out)
}

fn cached_ids(store: &StoreHandle, kind: TargetKind, model_id: &str) -> Result<HashSet<String>, StoreError> {
    let rows = store.query_rows(kind.table(), &Filter::all().eq("model_id", model_id))?;
    Ok(rows
        .into_iter()
        .filter_map(|r| r.get(kind.id_field()).and_then(Value::as_str).map(str::to_string))
        .collect())
}

/// Runs `config`'s own provider. See [`run_enricher_with`].
pub fn run_enricher(name: &str, store: &StoreHandle, config: &EnricherConfig) -> Result<EnrichReport, EnrichError> {
    config.validate()?;
    let provider = config.provider()?;
    run_enricher_with(name, store, config, provider.as_ref())
}

/// Enriches every target of `config` through `provider`. Per-target errors
/// are recorded in the report; rejected credentials abort the run after the
/// current batch's successes are stored.
pub fn run_enricher_with(
    name: &str,
    store: &StoreHandle,
    config: &EnricherConfig,
    provider: &dyn Provider,
) -> Result<EnrichReport, EnrichError> {
    config.validate()?;
    let model_id = config.model_id();
    let kind = config.target_kind;
    let mut report = EnrichReport { model_id: model_id.clone(), ..Default::default() };

    if config.reset_cache {
        let removed = store.delete(kind.table(), &Filter::all().eq("model_id", model_id.as_str()))?;
        tracing::info!(enricher = name, removed, "cleared cached enrichments");
    }
    let targets = load_targets(store, config)?;
    report.targets_considered = targets.len() as u64;
    let cached = if config.only_missing { cached_ids(store, kind, &model_id)? } else { HashSet::new() };

    let mut pending = Vec::new();
    for (id, row) in &targets {
        if cached.contains(id) {
            report.targets_skipped_cached += 1;
            continue;
        }
        match render_prompt(&config.user_template, row) {
            Ok(prompt) => pending.push((id.as_str(), prompt)),
            Err(e) => report.fail(id, e.to_string()),
        }
    }

    for batch in pending.chunks(config.batch_size) {
        report.batches += 1;
        let results = dispatch(batch, config, provider);
        report.requests_sent += batch.len() as u64;

        let created_at = config.run_time.unwrap_or_else(Timestamp::now);
        let mut records = Vec::new();
        let mut auth_status = None;
        for ((id, _), result) in batch.iter().zip(results) {
            match result {
                Ok(c) => {
                    report.retries += u64::from(c.retries);
                    let body = json!({
                        "response_text": c.response_text,
                        "provider_kind": provider.kind().as_str(),
                        "finish_reason": c.finish_reason,
                        "enricher": name,
                    });
                    let Value::Object(body) = body else { unreachable!() };
                    records.push(Record::Enrichment(EnrichmentRecord {
                        target_kind: kind,
                        target_id: id.to_string(),
                        model_id: model_id.clone(),
                        body,
                        created_at,
                        retrieved_at: created_at,
                    }));
                }
                Err(f) => {
                    report.retries += u64::from(f.retries);
                    if let ProviderError::Auth(status) = f.error {
                        auth_status = Some(status);
                    }
                    report.fail(id, f.error.to_string());
                }
            }
        }
        let counts = store.insert_batch(&records)?.get(kind.table());
        report.responses_stored += counts.inserted;
        report.targets_skipped_cached += counts.deduplicated;
        tracing::info!(enricher = name, batch = report.batches, stored = counts.inserted, "committed batch");
        if let Some(status) = auth_status {
            return Err(EnrichError::Auth { status, committed: report.responses_stored });
        }
    }
    Ok(report)
}

/// Sends one batch with at most `config.parallelism` requests in flight.
/// Results come back in batch order.
fn dispatch(
    batch: &[(&str, String)],
    config: &EnricherConfig,
    provider: &dyn Provider,
) -> Vec<Result<Completion, ProviderFailure>> {
    let slots: Vec<Mutex<Option<Result<Completion, ProviderFailure>>>> = batch.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.parallelism.min(batch.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, prompt)) = batch.get(i) else { break };
                let result = provider.send(&config.system_prompt, prompt, &config.chat_model_id, config.max_tokens);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{PostRecord, Table};

    fn store_with_posts(dir: &tempfile::TempDir, n: usize) -> StoreHandle {
        let s = crate::init_store(dir.path().join("e").to_str().unwrap(), true).unwrap();
        let t = Timestamp::ymd_hms(2023, 5, 14, 0, 0, 0);
        let posts: Vec<Record> =
            (0..n).map(|i| PostRecord::new(format!("p{i:02}"), "u", format!("post {i}"), t, t).into()).collect();
        s.insert_batch(&posts).unwrap();
        s
    }

    fn mock() -> EnricherConfig {
        let mut c =
            EnricherConfig::new(ProviderKind::Mock, "mock-1", "v1_sentiment", "Analyze the sentiment of this post: {body}");
        c.run_time = Some(Timestamp::ymd_hms(2023, 5, 16, 0, 0, 0));
        c
    }

    #[test]
    fn mock_batches_and_cache() {
        let dir = tempfile::tempdir().unwrap();
        let s = store_with_posts(&dir, 25);
        let report = run_enricher("textgen", &s, &mock()).unwrap();
        assert_eq!(report.batches, 3);
        assert_eq!(report.responses_stored, 25);
        let rows = s.query_rows(Table::PostEnrichments, &Filter::all()).unwrap();
        assert_eq!(rows[0]["model_id"], "mock-1:v1_sentiment");
        assert_eq!(rows[0]["body"]["response_text"], "Analyze the sentiment of this post: post 0");
        assert_eq!(rows[0]["body"]["provider_kind"], "MOCK");

        let again = run_enricher("textgen", &s, &mock()).unwrap();
        assert_eq!(again.requests_sent, 0);
        assert_eq!(again.targets_skipped_cached, 25);
    }

    #[test]
    fn reset_cache_refreshes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let s = store_with_posts(&dir, 25);
        run_enricher("textgen", &s, &mock()).unwrap();
        let mut cfg = mock();
        cfg.reset_cache = true;
        cfg.run_time = Some(Timestamp::ymd_hms(2023, 5, 17, 0, 0, 0));
        let report = run_enricher("textgen", &s, &cfg).unwrap();
        assert_eq!(report.responses_stored, 25);
        let rows = s.query_rows(Table::PostEnrichments, &Filter::all()).unwrap();
        assert_eq!(rows.len(), 25);
        assert!(rows.iter().all(|r| r["created_at"] == "2023-05-17T00:00:00Z"));
    }

    #[test]
    fn template_must_name_target_fields() {
        let mut cfg = mock();
        cfg.user_template = "{text}".into();
        assert!(matches!(cfg.validate(), Err(EnrichError::InvalidConfig(m)) if m.contains("`text`")));
        cfg.user_template = "{bio}".into();
        cfg.target_kind = TargetKind::Account;
        cfg.validate().unwrap();
    }

    #[test]
    fn gemini_without_base_url_is_unsupported() {
        let mut cfg = mock();
        cfg.provider_kind = ProviderKind::Gemini;
        cfg.api_key = Some(Secret::new("k"));
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("unsupported"), "{err}");
    }

    struct Flaky;

    impl Provider for Flaky {
        fn kind(&self) -> ProviderKind {
            ProviderKind::OpenaiCompat
        }

        fn send(&self, _: &str, user: &str, _: &str, _: u32) -> Result<Completion, ProviderFailure> {
            if user.ends_with('3') {
                Err(ProviderFailure { error: ProviderError::Malformed("bad".into()), retries: 0 })
            } else {
                Ok(Completion { response_text: "ok".into(), finish_reason: None, retries: 1 })
            }
        }
    }

    #[test]
    fn per_target_failures_do_not_stop_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let s = store_with_posts(&dir, 5);
        let mut cfg = mock();
        cfg.user_template = "{body}".into();
        let report = run_enricher_with("textgen", &s, &cfg, &Flaky).unwrap();
        assert_eq!(report.responses_stored, 4);
        assert_eq!(report.failures, 1);
        assert_eq!(report.retries, 4);
        assert_eq!(report.failure_details[0].target_id, "p03");
        assert_eq!(
            report.targets_considered,
            report.targets_skipped_cached + report.responses_stored + report.failures
        );
    }
}

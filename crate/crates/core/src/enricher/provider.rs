use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::secret::Secret;

pub const ANTHROPIC_VERSION: &str = "2023-06-01";
pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProviderKind {
    OpenaiCompat,
    Anthropic,
    Gemini,
    Mock,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::OpenaiCompat => "OPENAI_COMPAT",
            ProviderKind::Anthropic => "ANTHROPIC",
            ProviderKind::Gemini => "GEMINI",
            ProviderKind::Mock => "MOCK",
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        [ProviderKind::OpenaiCompat, ProviderKind::Anthropic, ProviderKind::Gemini, ProviderKind::Mock]
            .into_iter()
            .find(|k| k.as_str() == up)
            .ok_or_else(|| format!("unknown provider_kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub response_text: String,
    pub finish_reason: Option<String>,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {detail}")]
    Status { status: u16, detail: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl ProviderError {
    fn is_transient(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderFailure {
    pub error: ProviderError,
    pub retries: u32,
}

/// One chat-completion backend. Implementations must be shareable across
/// the worker threads of a run.
pub trait Provider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    fn send(&self, system_prompt: &str, user_prompt: &str, chat_model_id: &str, max_tokens: u32)
        -> Result<Completion, ProviderFailure>;
}

/// In-process provider: echoes the user prompt, or always answers `fixed`.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    pub fixed: Option<String>,
}

impl Provider for MockProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn send(&self, _system: &str, user: &str, _model: &str, _max_tokens: u32) -> Result<Completion, ProviderFailure> {
        Ok(Completion {
            response_text: self.fixed.clone().unwrap_or_else(|| user.to_string()),
            finish_reason: Some("stop".into()),
            retries: 0,
        })
    }
}

/// OPENAI_COMPAT, GEMINI (through its OpenAI-compatible endpoint) and
/// ANTHROPIC over blocking HTTP, with retries on transport errors, 429 and
/// 5xx.
pub struct HttpProvider {
    kind: ProviderKind,
    url: String,
    api_key: Option<Secret>,
    client: reqwest::blocking::Client,
    retry_base_delay: Duration,
}

impl fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProvider").field("kind", &self.kind).field("url", &self.url).finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(
        kind: ProviderKind,
        base_url: &str,
        api_key: Option<Secret>,
        retry_base_delay: Duration,
        timeout: Duration,
    ) -> Result<Self, String> {
        let base = base_url.trim();
        if base.is_empty() {
            return Err(match kind {
                ProviderKind::Gemini => "GEMINI is unsupported without an OpenAI-compatible base_url".to_string(),
                _ => format!("{kind} requires base_url"),
            });
        }
        let url = match kind {
            ProviderKind::OpenaiCompat | ProviderKind::Gemini => {
                format!("{}/chat/completions", base.trim_end_matches('/'))
            }
            ProviderKind::Anthropic => base.to_string(),
            ProviderKind::Mock => return Err("MOCK is not an HTTP provider".into()),
        };
        if matches!(kind, ProviderKind::Anthropic | ProviderKind::Gemini) && api_key.is_none() {
            return Err(format!("{kind} requires an api key"));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| format!("cannot build HTTP client: {e}"))?;
        Ok(HttpProvider { kind, url, api_key, client, retry_base_delay })
    }

    fn request_body(&self, system: &str, user: &str, model: &str, max_tokens: u32) -> Value {
        match self.kind {
            ProviderKind::Anthropic => json!({
                "model": model,
                "system": system,
                "messages": [{"role": "user", "content": user}],
                "max_tokens": max_tokens,
            }),
            _ => json!({
                "model": model,
                "messages": [
                    {"role": "system", "content": system},
                    {"role": "user", "content": user},
                ],
                "max_tokens": max_tokens,
            }),
        }
    }

    fn attempt(&self, body: &Value) -> Result<Completion, ProviderError> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = match self.kind {
                ProviderKind::Anthropic => {
                    req.header("x-api-key", key.expose()).header("anthropic-version", ANTHROPIC_VERSION)
                }
                _ => req.bearer_auth(key.expose()),
            };
        }
        // Some gateways take credentials in the query string, so errors drop the URL.
        let resp = req.send().map_err(|e| ProviderError::Transport(e.without_url().to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.without_url().to_string()))?;
        if status == 401 || status == 403 {
            return Err(ProviderError::Auth(status));
        }
        if !(200..300).contains(&status) {
            let detail: String = text.chars().take(200).collect();
            return Err(ProviderError::Status { status, detail });
        }
        let doc: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let (content, finish) = match self.kind {
            ProviderKind::Anthropic => (doc.pointer("/content/0/text"), doc.get("stop_reason")),
            _ => (doc.pointer("/choices/0/message/content"), doc.pointer("/choices/0/finish_reason")),
        };
        let response_text = content
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::Malformed("no assistant text in response".into()))?
            .to_string();
        Ok(Completion {
            response_text,
            finish_reason: finish.and_then(Value::as_str).map(str::to_string),
            retries: 0,
        })
    }
}

impl Provider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        self.kind
    }

    fn send(&self, system: &str, user: &str, model: &str, max_tokens: u32) -> Result<Completion, ProviderFailure> {
        let body = self.request_body(system, user, model, max_tokens);
        let mut delay = self.retry_base_delay;
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Ok(mut c) => {
                    c.retries = retries;
                    return Ok(c);
                }
                Err(e) if e.is_transient() && retries + 1 < MAX_ATTEMPTS => {
                    tracing::warn!(attempt = retries + 1, error = %e, "retrying provider request");
                    std::thread::sleep(delay);
                    delay *= 2;
                    retries += 1;
                }
                Err(error) => return Err(ProviderFailure { error, retries }),
            }
        }
    }
}

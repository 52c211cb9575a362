//! Chat-completion access: one request/response model over HTTP providers and
//! deterministic stubs, with bounded retries, bounded concurrency and an
//! on-disk response cache.

mod cache;
mod http;
mod retry;
mod stub;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, CacheStore};
pub use http::HttpChat;
pub use retry::RetryPolicy;
pub use stub::{answer_key_entry, stereotype_answer, AnswerKeyEntry, ContainsRule, Policy, PolicyConfig, RuleStub, Script, ScriptedStub};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("provider error {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("corrupt cache entry {path}: {reason}")]
    CacheCorrupt { path: PathBuf, reason: String },
    #[error("unknown stub policy `{0}`")]
    UnknownPolicy(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("cache i/o on {path}: {source}")]
    CacheIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GatewayError {
    fn is_transient(&self) -> bool {
        match self {
            GatewayError::Timeout | GatewayError::RateLimited { .. } => true,
            GatewayError::ProviderError { status, .. } => *status == 0 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_seed: Option<u64>,
}

impl ChatRequest {
    /// A single-turn request with temperature 0.
    pub fn user(model_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            system_prompt: None,
            messages: vec![Message {
                role: Role::User,
                content: content.into(),
            }],
            temperature: 0.0,
            max_tokens: 512,
            request_seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.messages.last() {
            None => Err(GatewayError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::User => Err(GatewayError::InvalidRequest(
                "last message must come from the user".into(),
            )),
            _ if self.temperature.is_nan() || self.temperature < 0.0 => {
                Err(GatewayError::InvalidRequest("negative temperature".into()))
            }
            _ if self.max_tokens == 0 => Err(GatewayError::InvalidRequest("max_tokens is 0".into())),
            _ => Ok(()),
        }
    }

    pub fn last_user(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub token_usage: TokenUsage,
    pub provider: String,
    pub cached: bool,
}

/// Digest identifying a request for caching: sha256 over the canonical JSON
/// of the sampling-relevant fields only.
pub fn cache_key(request: &ChatRequest) -> String {
    #[derive(Serialize)]
    struct Keyed<'a> {
        model_id: &'a str,
        system_prompt: Option<&'a str>,
        messages: &'a [Message],
        temperature: f64,
        max_tokens: u32,
        request_seed: Option<u64>,
    }
    let keyed = Keyed {
        model_id: &request.model_id,
        system_prompt: request.system_prompt.as_deref(),
        messages: &request.messages,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
        request_seed: request.request_seed,
    };
    let json = serde_json::to_vec(&keyed).expect("request serializes");
    hex::encode(Sha256::digest(json))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    HttpChat,
    ScriptedStub,
    RuleStub,
}

fn one() -> usize {
    1
}
fn three() -> u32 {
    3
}
fn default_timeout() -> u64 {
    60
}
fn default_max_tokens() -> u32 {
    512
}
fn default_base_ms() -> u64 {
    500
}
fn default_cap_ms() -> u64 {
    30_000
}

/// Declarative endpoint configuration as it appears in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub kind: EndpointKind,
    #[serde(default)]
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_ref: Option<String>,
    #[serde(default = "one")]
    pub max_concurrent: usize,
    #[serde(default = "three")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_cap_ms")]
    pub retry_cap_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Script>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyConfig>,
}

impl Endpoint {
    fn blank(kind: EndpointKind, model_id: &str) -> Self {
        Endpoint {
            kind,
            model_id: model_id.to_string(),
            base_url: None,
            auth_ref: None,
            max_concurrent: 1,
            max_retries: 3,
            timeout_secs: default_timeout(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            retry_base_ms: default_base_ms(),
            retry_cap_ms: default_cap_ms(),
            script: None,
            policy: None,
        }
    }

    pub fn http_chat(model_id: &str, base_url: &str, auth_ref: Option<&str>) -> Self {
        Endpoint {
            base_url: Some(base_url.to_string()),
            auth_ref: auth_ref.map(str::to_string),
            ..Endpoint::blank(EndpointKind::HttpChat, model_id)
        }
    }

    pub fn scripted_stub(model_id: &str, script: Script) -> Self {
        Endpoint {
            script: Some(script),
            ..Endpoint::blank(EndpointKind::ScriptedStub, model_id)
        }
    }

    /// A rule-stub endpoint; rejects unknown policy names up front.
    pub fn rule_stub(model_id: &str, policy: PolicyConfig, fallback: Option<Script>) -> Result<Self, GatewayError> {
        Policy::from_config(&policy)?;
        Ok(Endpoint {
            policy: Some(policy),
            script: fallback,
            ..Endpoint::blank(EndpointKind::RuleStub, model_id)
        })
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_concurrent == 0 {
            return Err(GatewayError::InvalidEndpoint("max_concurrent must be at least 1".into()));
        }
        match self.kind {
            EndpointKind::HttpChat if self.base_url.is_none() => Err(GatewayError::InvalidEndpoint(
                "http_chat endpoint needs base_url".into(),
            )),
            EndpointKind::ScriptedStub if self.script.is_none() => Err(GatewayError::InvalidEndpoint(
                "scripted_stub endpoint needs a script".into(),
            )),
            EndpointKind::RuleStub => match &self.policy {
                None => Err(GatewayError::InvalidEndpoint("rule_stub endpoint needs a policy".into())),
                Some(p) => Policy::from_config(p).map(|_| ()),
            },
            _ => Ok(()),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base: Duration::from_millis(self.retry_base_ms),
            cap: Duration::from_millis(self.retry_cap_ms),
        }
    }
}

/// One provider attempt; retries and caching live in [`Gateway`].
pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    fn provider(&self) -> &str;

    /// Hands the backend per-query answers; only rule stubs use them.
    fn prime(&self, _entries: Vec<(String, AnswerKeyEntry)>) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub calls: u64,
    pub provider_invocations: u64,
    pub retries: u64,
    pub cache_hits: u64,
}

#[derive(Default)]
struct Counters {
    calls: AtomicU64,
    provider_invocations: AtomicU64,
    retries: AtomicU64,
    cache_hits: AtomicU64,
}

struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct PermitGuard<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard(self)
    }
}

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Thread-safe handle over one endpoint.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    permits: Permits,
    counters: Counters,
    cache: Option<CacheStore>,
    model_id: String,
    temperature: f64,
    max_tokens: u32,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, retry: RetryPolicy, max_concurrent: usize) -> Self {
        Gateway {
            backend,
            retry,
            permits: Permits {
                free: Mutex::new(max_concurrent.max(1)),
                cv: Condvar::new(),
            },
            counters: Counters::default(),
            cache: None,
            model_id: String::new(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }

    pub fn from_endpoint(endpoint: &Endpoint) -> Result<Self, GatewayError> {
        endpoint.validate()?;
        let backend: Arc<dyn ChatBackend> = match endpoint.kind {
            EndpointKind::HttpChat => Arc::new(HttpChat::new(endpoint)?),
            EndpointKind::ScriptedStub => Arc::new(ScriptedStub::new(
                endpoint.script.clone().unwrap_or_default(),
            )),
            EndpointKind::RuleStub => Arc::new(RuleStub::new(
                Policy::from_config(endpoint.policy.as_ref().expect("validated"))?,
                endpoint.script.clone(),
            )),
        };
        let mut gw = Gateway::new(backend, endpoint.retry_policy(), endpoint.max_concurrent);
        gw.model_id = endpoint.model_id.clone();
        gw.temperature = endpoint.temperature;
        gw.max_tokens = endpoint.max_tokens;
        Ok(gw)
    }

    /// Routes every [`Gateway::call`] through an on-disk cache at `dir`.
    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache = Some(CacheStore::new(dir));
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn provider(&self) -> &str {
        self.backend.provider()
    }

    /// A request using this endpoint's model and sampling defaults.
    pub fn request(&self, system_prompt: Option<&str>, user: &str, seed: Option<u64>) -> ChatRequest {
        ChatRequest {
            system_prompt: system_prompt.map(str::to_string),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            request_seed: seed,
            ..ChatRequest::user(self.model_id.clone(), user)
        }
    }

    pub fn prime(&self, entries: Vec<(String, AnswerKeyEntry)>) {
        self.backend.prime(entries);
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            calls: self.counters.calls.load(Ordering::Relaxed),
            provider_invocations: self.counters.provider_invocations.load(Ordering::Relaxed),
            retries: self.counters.retries.load(Ordering::Relaxed),
            cache_hits: self.counters.cache_hits.load(Ordering::Relaxed),
        }
    }

    /// Sends `request`, retrying transient failures with backoff.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        self.counters.calls.fetch_add(1, Ordering::Relaxed);
        let _permit = self.permits.acquire();
        let mut attempt = 0u32;
        loop {
            self.counters.provider_invocations.fetch_add(1, Ordering::Relaxed);
            match self.backend.send(request) {
                Ok(resp) => return Ok(resp),
                Err(e) if e.is_transient() && attempt < self.retry.max_retries => {
                    let delay = self.retry.delay(attempt);
                    log::warn!("transient provider failure ({e}); retry {} in {delay:?}", attempt + 1);
                    std::thread::sleep(delay);
                    self.counters.retries.fetch_add(1, Ordering::Relaxed);
                    attempt += 1;
                }
                Err(GatewayError::RateLimited { .. }) => {
                    return Err(GatewayError::RateLimited { attempts: attempt + 1 })
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Serves `request` from `cache_dir` when present, else completes and stores it.
    pub fn cached_complete(&self, request: &ChatRequest, cache_dir: &Path) -> Result<ChatResponse, GatewayError> {
        self.complete_with(request, &CacheStore::new(cache_dir))
    }

    /// [`Gateway::complete`], through the configured cache if any.
    pub fn call(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        match &self.cache {
            Some(store) => self.complete_with(request, store),
            None => self.complete(request),
        }
    }

    fn complete_with(&self, request: &ChatRequest, store: &CacheStore) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let key = cache_key(request);
        if let Some(mut hit) = store.get(&key)? {
            self.counters.calls.fetch_add(1, Ordering::Relaxed);
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            hit.cached = true;
            return Ok(hit);
        }
        let response = self.complete(request)?;
        if response.finish_reason != FinishReason::Error {
            store.put(&key, request, &response)?;
        }
        Ok(response)
    }
}

/// Rough whitespace token count used by stubs for usage figures.
pub(crate) fn approx_tokens(request: &ChatRequest) -> u64 {
    let system = request.system_prompt.as_deref().unwrap_or_default();
    let words = |s: &str| s.split_whitespace().count() as u64;
    words(system) + request.messages.iter().map(|m| words(&m.content)).sum::<u64>()
}

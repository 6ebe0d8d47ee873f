//! Completion backends.
//!
//! [`Backend`] is the one interface the extractor talks to. Implementations:
//!
//! - [`LiveBackend`]: OpenAI-compatible `POST /v1/chat/completions`, with
//!   exponential backoff and jitter on 429/5xx/transport failures;
//! - [`CachedBackend`]: serves from a [`ReplayCache`] and, in record mode,
//!   forwards misses to an upstream backend and stores the result;
//! - [`ScriptedBackend`]: programmed responses for tests.
//!
//! [`ConcurrencyLimited`] bounds the number of in-flight requests of any
//! backend.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::DescriptorId;
use crate::prompt::ChatMessage;
use crate::rules::RuleKind;

pub const API_KEY_ENV: &str = "RESTGPT_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 512;
pub const DEFAULT_CONCURRENCY: usize = 4;

/// Which descriptor and rule kind a request is for. Used for logging only;
/// not part of the cache key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestTag {
    pub descriptor: DescriptorId,
    pub rule_kind: RuleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_tag: Option<RequestTag>,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// The fields that determine the completion, in a fixed layout.
    pub fn canonical(&self) -> CanonicalRequest {
        CanonicalRequest {
            model: self.model_name.clone(),
            temperature: self.temperature,
            max_tokens: self.max_output_tokens,
            messages: self.messages.clone(),
        }
    }
}

/// Serialized form hashed by [`cache_key`] and stored in the replay cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRequest {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

/// Hex SHA-256 of the canonical JSON of (model, temperature, max tokens,
/// messages).
pub fn cache_key(request: &CompletionRequest) -> String {
    let canonical = serde_json::to_vec(&request.canonical()).expect("request serializes");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Live => "live",
            BackendKind::Replay => "replay",
            BackendKind::Scripted => "scripted",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_units: u64,
    pub output_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub finish_reason: String,
    pub usage: Usage,
    pub backend_kind: BackendKind,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("replay cache has no entry for request {digest}")]
    CacheMiss { digest: String },
    #[error("gave up after {attempts} attempts: {last_error}")]
    AttemptsExhausted { attempts: u32, last_error: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    Malformed(String),
    #[error("missing API key (set {API_KEY_ENV})")]
    MissingApiKey,
    #[error("scripted backend has no response left")]
    ScriptExhausted,
    #[error("scripted failure: {0}")]
    Scripted(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError>;
    fn kind(&self) -> BackendKind;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(request)
    }

    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(request)
    }

    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
}

// ---------------------------------------------------------------------------
// Replay cache

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub digest: String,
    pub request: CanonicalRequest,
    pub result: CompletionResult,
}

/// Persistent digest → completion map, stored as JSONL sorted by digest.
#[derive(Debug, Default)]
pub struct ReplayCache {
    entries: Mutex<BTreeMap<String, CacheRecord>>,
}

impl ReplayCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, CacheError> {
        let text = std::fs::read_to_string(path).map_err(|source| CacheError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&text, &path.display().to_string())
    }

    /// Load when the file exists, otherwise start empty.
    pub fn load_or_empty(path: &Path) -> Result<Self, CacheError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    pub fn from_jsonl(text: &str, source_name: &str) -> Result<Self, CacheError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| CacheError::Corrupt {
                path: source_name.to_string(),
                line: i + 1,
                message,
            };
            let record: CacheRecord =
                serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            let recomputed = hex::encode(Sha256::digest(
                serde_json::to_vec(&record.request).expect("request serializes"),
            ));
            if recomputed != record.digest {
                return Err(corrupt(format!(
                    "digest {} does not match its request",
                    record.digest
                )));
            }
            entries.insert(record.digest.clone(), record);
        }
        Ok(ReplayCache {
            entries: Mutex::new(entries),
        })
    }

    pub fn to_jsonl(&self) -> String {
        let entries = self.entries.lock().expect("cache lock");
        let mut out = String::new();
        for record in entries.values() {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let io = |source| CacheError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = std::fs::File::create(path).map_err(io)?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }

    pub fn get(&self, digest: &str) -> Option<CompletionResult> {
        self.entries
            .lock()
            .expect("cache lock")
            .get(digest)
            .map(|r| r.result.clone())
    }

    pub fn insert(&self, request: &CompletionRequest, result: CompletionResult) {
        let digest = cache_key(request);
        let record = CacheRecord {
            digest: digest.clone(),
            request: request.canonical(),
            result,
        };
        self.entries
            .lock()
            .expect("cache lock")
            .insert(digest, record);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Replay from a cache; with an upstream, misses are forwarded and recorded.
pub struct CachedBackend {
    cache: Arc<ReplayCache>,
    upstream: Option<Arc<dyn Backend>>,
}

impl CachedBackend {
    /// Strict replay: a miss is an error.
    pub fn replay(cache: Arc<ReplayCache>) -> Self {
        CachedBackend {
            cache,
            upstream: None,
        }
    }

    /// Record mode: misses go upstream and are stored.
    pub fn record(cache: Arc<ReplayCache>, upstream: Arc<dyn Backend>) -> Self {
        CachedBackend {
            cache,
            upstream: Some(upstream),
        }
    }

    pub fn cache(&self) -> &Arc<ReplayCache> {
        &self.cache
    }
}

impl Backend for CachedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        request.validate()?;
        let digest = cache_key(request);
        if let Some(mut hit) = self.cache.get(&digest) {
            hit.backend_kind = BackendKind::Replay;
            return Ok(hit);
        }
        match &self.upstream {
            None => Err(BackendError::CacheMiss { digest }),
            Some(upstream) => {
                let result = upstream.complete(request)?;
                self.cache.insert(request, result.clone());
                Ok(result)
            }
        }
    }

    fn kind(&self) -> BackendKind {
        match &self.upstream {
            None => BackendKind::Replay,
            Some(u) => u.kind(),
        }
    }
}

// ---------------------------------------------------------------------------
// Scripted backend

type Responder = dyn Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync;

/// Test backend answering from a queue or a function of the request.
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<Result<String, String>>>,
    responder: Option<Box<Responder>>,
    delay: Duration,
    calls: AtomicUsize,
    seen: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    /// Answer with the given texts in order.
    pub fn sequence<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            queue: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            responder: None,
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    /// Answer every request with the same text.
    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::from_fn(move |_| Ok(text.clone()))
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    {
        ScriptedBackend {
            queue: Mutex::new(VecDeque::new()),
            responder: Some(Box::new(f)),
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    /// Queue a failure (only for sequence mode).
    pub fn push_failure(&self, message: impl Into<String>) {
        self.queue
            .lock()
            .expect("queue lock")
            .push_back(Err(message.into()));
    }

    /// Sleep this long inside every call.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every request received, in arrival order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.seen.lock().expect("seen lock").clone()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().expect("seen lock").push(request.clone());
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let text = match &self.responder {
            Some(f) => f(request)?,
            None => match self.queue.lock().expect("queue lock").pop_front() {
                Some(Ok(text)) => text,
                Some(Err(message)) => return Err(BackendError::Scripted(message)),
                None => return Err(BackendError::ScriptExhausted),
            },
        };
        Ok(CompletionResult {
            usage: Usage {
                prompt_units: request
                    .messages
                    .iter()
                    .map(|m| m.content.len() as u64)
                    .sum(),
                output_units: text.len() as u64,
            },
            text,
            finish_reason: "stop".into(),
            backend_kind: BackendKind::Scripted,
            // The programmed delay, so recordings of scripted runs are
            // reproducible byte for byte.
            latency_ms: self.delay.as_millis() as u64,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }
}

// ---------------------------------------------------------------------------
// Concurrency limit

/// Counting semaphore around any backend.
pub struct ConcurrencyLimited<B> {
    inner: B,
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl<B: Backend> ConcurrencyLimited<B> {
    pub fn new(inner: B, limit: usize) -> Self {
        ConcurrencyLimited {
            inner,
            limit: limit.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for ConcurrencyLimited<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        {
            let mut n = self.in_flight.lock().expect("limit lock");
            while *n >= self.limit {
                n = self.freed.wait(n).expect("limit lock");
            }
            *n += 1;
        }
        struct Release<'a>(&'a Mutex<usize>, &'a Condvar);
        impl Drop for Release<'_> {
            fn drop(&mut self) {
                *self.0.lock().expect("limit lock") -= 1;
                self.1.notify_one();
            }
        }
        let _release = Release(&self.in_flight, &self.freed);
        self.inner.complete(request)
    }

    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }
}

// ---------------------------------------------------------------------------
// Live backend

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    /// Relative jitter, e.g. 0.2 for ±20%.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(retry as i32))
    }

    pub fn jittered_delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let nominal = self.nominal_delay(retry);
        if self.jitter <= 0.0 {
            return nominal;
        }
        nominal.mul_f64(1.0 + rng.gen_range(-self.jitter..=self.jitter))
    }
}

#[derive(Debug, Clone)]
pub struct HttpReply {
    pub status: u16,
    pub retry_after: Option<Duration>,
    pub body: String,
}

#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct TransportFailure {
    pub message: String,
}

/// The HTTP exchange, separated out so retry handling can be tested without
/// a network.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &serde_json::Value,
    ) -> Result<HttpReply, TransportFailure>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportFailure> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportFailure {
                message: e.to_string(),
            })?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &serde_json::Value,
    ) -> Result<HttpReply, TransportFailure> {
        let response = self
            .client
            .post(url)
            .bearer_auth(api_key)
            .json(body)
            .send()
            .map_err(|e| TransportFailure {
                message: e.to_string(),
            })?;
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let body = response.text().map_err(|e| TransportFailure {
            message: e.to_string(),
        })?;
        Ok(HttpReply {
            status,
            retry_after,
            body,
        })
    }
}

type Sleeper = dyn Fn(Duration) + Send + Sync;

pub struct LiveBackend {
    base_url: String,
    api_key: String,
    retry: RetryPolicy,
    transport: Box<dyn Transport>,
    sleep: Box<Sleeper>,
}

impl LiveBackend {
    pub fn new(
        base_url: impl Into<String>,
        api_key: impl Into<String>,
        transport: Box<dyn Transport>,
    ) -> Self {
        LiveBackend {
            base_url: base_url.into(),
            api_key: api_key.into(),
            retry: RetryPolicy::default(),
            transport,
            sleep: Box::new(std::thread::sleep),
        }
    }

    /// Backend using `RESTGPT_API_KEY` and a reqwest transport.
    pub fn from_env(base_url: Option<&str>, timeout: Duration) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or(BackendError::MissingApiKey)?;
        let transport =
            ReqwestTransport::new(timeout).map_err(|e| BackendError::Malformed(e.message))?;
        Ok(Self::new(
            base_url.unwrap_or(DEFAULT_BASE_URL),
            key,
            Box::new(transport),
        ))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    pub fn endpoint(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.base_url.trim_end_matches('/')
        )
    }

    pub fn request_body(request: &CompletionRequest) -> serde_json::Value {
        json!({
            "model": request.model_name,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
    }

    fn parse_reply(body: &str) -> Result<(String, String, Usage), BackendError> {
        let v: serde_json::Value = serde_json::from_str(body)
            .map_err(|e| BackendError::Malformed(format!("not JSON: {e}")))?;
        let choice = v
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| BackendError::Malformed("no `choices[0]`".into()))?;
        let finish = choice
            .get("finish_reason")
            .and_then(|f| f.as_str())
            .unwrap_or("stop")
            .to_string();
        let text = choice
            .get("message")
            .and_then(|m| m.get("content"))
            .and_then(|c| c.as_str());
        let text = match (text, finish.as_str()) {
            (Some(t), _) => t.to_string(),
            (None, "stop") => {
                return Err(BackendError::Malformed(
                    "stop without `message.content`".into(),
                ))
            }
            (None, _) => String::new(),
        };
        let usage = v.get("usage");
        let units = |k: &str| {
            usage
                .and_then(|u| u.get(k))
                .and_then(|n| n.as_u64())
                .unwrap_or(0)
        };
        Ok((
            text,
            finish,
            Usage {
                prompt_units: units("prompt_tokens"),
                output_units: units("completion_tokens"),
            },
        ))
    }
}

impl Backend for LiveBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        request.validate()?;
        let url = self.endpoint();
        let body = Self::request_body(request);
        let started = Instant::now();
        let mut rng = rand::thread_rng();
        let mut last_error = String::new();
        let mut hint = None;
        for attempt in 0..self.retry.max_attempts.max(1) {
            if attempt > 0 {
                (self.sleep)(self.pending_delay(attempt - 1, hint.take(), &mut rng));
            }
            match self.transport.post_json(&url, &self.api_key, &body) {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    let (text, finish_reason, usage) = Self::parse_reply(&reply.body)?;
                    return Ok(CompletionResult {
                        text,
                        finish_reason,
                        usage,
                        backend_kind: BackendKind::Live,
                        latency_ms: started.elapsed().as_millis() as u64,
                    });
                }
                Ok(reply) if reply.status == 429 || reply.status >= 500 => {
                    log::warn!("attempt {} got HTTP {}", attempt + 1, reply.status);
                    last_error = format!("HTTP {}", reply.status);
                    hint = reply.retry_after;
                }
                Ok(reply) => {
                    return Err(BackendError::Http {
                        status: reply.status,
                        body: reply.body,
                    })
                }
                Err(failure) => {
                    log::warn!("attempt {} failed: {}", attempt + 1, failure.message);
                    last_error = failure.message;
                }
            }
        }
        Err(BackendError::AttemptsExhausted {
            attempts: self.retry.max_attempts.max(1),
            last_error,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }
}

impl LiveBackend {
    /// Backoff delay, stretched to honor a server `Retry-After` hint.
    fn pending_delay(&self, retry: u32, hint: Option<Duration>, rng: &mut impl Rng) -> Duration {
        let delay = self.retry.jittered_delay(retry, rng);
        match hint {
            Some(h) if h > delay => h,
            _ => delay,
        }
    }
}

/// Where a run's backend gets its answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendSelection {
    Live,
    Replay,
    Scripted,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::Role;

    fn request(temperature: f64) -> CompletionRequest {
        CompletionRequest {
            messages: vec![
                ChatMessage::new(Role::System, "sys"),
                ChatMessage::new(Role::User, "Parameter: sort_order"),
            ],
            model_name: "gpt-3.5-turbo".into(),
            temperature,
            max_output_tokens: 256,
            request_tag: None,
        }
    }

    #[test]
    fn cache_key_depends_on_relevant_fields_only() {
        let a = request(0.0);
        let mut b = request(0.0);
        b.request_tag = Some(RequestTag {
            descriptor: DescriptorId {
                service: "s".into(),
                path: "/p".into(),
                method: crate::model::HttpMethod::Get,
                location: crate::model::ParamLocation::Query,
                name: "n".into(),
            },
            rule_kind: RuleKind::Examples,
        });
        assert_eq!(cache_key(&a), cache_key(&b));
        assert_ne!(cache_key(&a), cache_key(&request(0.7)));
        let mut c = request(0.0);
        c.max_output_tokens = 257;
        assert_ne!(cache_key(&a), cache_key(&c));
        let mut d = request(0.0);
        d.model_name = "other".into();
        assert_ne!(cache_key(&a), cache_key(&d));
        assert_eq!(cache_key(&a).len(), 64);
    }

    #[test]
    fn request_validation() {
        assert!(request(2.5).validate().is_err());
        let mut r = request(0.0);
        r.messages.clear();
        assert!(r.validate().is_err());
    }

    #[test]
    fn scripted_sequence_and_failures() {
        let b = ScriptedBackend::sequence(["None"]);
        b.push_failure("boom");
        assert_eq!(b.complete(&request(0.0)).unwrap().text, "None");
        assert!(matches!(
            b.complete(&request(0.0)),
            Err(BackendError::Scripted(_))
        ));
        assert!(matches!(
            b.complete(&request(0.0)),
            Err(BackendError::ScriptExhausted)
        ));
        assert_eq!(b.calls(), 3);
    }

    #[test]
    fn record_mode_memoizes() {
        let upstream = Arc::new(ScriptedBackend::constant("example [ASC]"));
        let cache = Arc::new(ReplayCache::new());
        let backend = CachedBackend::record(cache.clone(), upstream.clone());
        let first = backend.complete(&request(0.0)).unwrap();
        let second = backend.complete(&request(0.0)).unwrap();
        assert_eq!(upstream.calls(), 1);
        assert_eq!(first.text, second.text);
        assert_eq!(second.backend_kind, BackendKind::Replay);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn strict_replay_misses() {
        let backend = CachedBackend::replay(Arc::new(ReplayCache::new()));
        match backend.complete(&request(0.0)) {
            Err(BackendError::CacheMiss { digest }) => assert_eq!(digest, cache_key(&request(0.0))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cache_jsonl_round_trip_and_corruption() {
        let cache = ReplayCache::new();
        let result = ScriptedBackend::constant("None")
            .complete(&request(0.0))
            .unwrap();
        cache.insert(&request(0.0), result.clone());
        cache.insert(&request(1.0), result);
        let text = cache.to_jsonl();
        let back = ReplayCache::from_jsonl(&text, "mem").unwrap();
        assert_eq!(back.to_jsonl(), text);

        let mut lines: Vec<&str> = text.lines().collect();
        lines[1] = "{not json";
        match ReplayCache::from_jsonl(&lines.join("\n"), "mem") {
            Err(CacheError::Corrupt { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let tampered = text.replacen("\"gpt-3.5-turbo\"", "\"gpt-4\"", 1);
        assert!(matches!(
            ReplayCache::from_jsonl(&tampered, "mem"),
            Err(CacheError::Corrupt { line: 1, .. })
        ));
    }

    struct FlakyTransport {
        replies: Mutex<VecDeque<Result<HttpReply, TransportFailure>>>,
        calls: AtomicUsize,
    }

    impl Transport for FlakyTransport {
        fn post_json(
            &self,
            url: &str,
            key: &str,
            body: &serde_json::Value,
        ) -> Result<HttpReply, TransportFailure> {
            assert!(url.ends_with("/v1/chat/completions"));
            assert_eq!(key, "k");
            assert_eq!(body["max_tokens"], 256);
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies
                .lock()
                .unwrap()
                .pop_front()
                .expect("scripted reply")
        }
    }

    fn ok_reply(text: &str) -> Result<HttpReply, TransportFailure> {
        Ok(HttpReply {
            status: 200,
            retry_after: None,
            body: json!({"choices":[{"message":{"role":"assistant","content":text},"finish_reason":"stop"}],
                         "usage":{"prompt_tokens":12,"completion_tokens":3}})
            .to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpReply, TransportFailure> {
        Ok(HttpReply {
            status: code,
            retry_after: None,
            body: "err".into(),
        })
    }

    fn live(
        replies: Vec<Result<HttpReply, TransportFailure>>,
    ) -> (LiveBackend, Arc<Mutex<Vec<Duration>>>) {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let log = slept.clone();
        let transport = FlakyTransport {
            replies: Mutex::new(replies.into()),
            calls: AtomicUsize::new(0),
        };
        let backend = LiveBackend::new("http://localhost:1/", "k", Box::new(transport))
            .with_sleeper(move |d| log.lock().unwrap().push(d));
        (backend, slept)
    }

    #[test]
    fn live_retries_transient_failures_with_backoff() {
        let (backend, slept) = live(vec![
            status(429),
            status(503),
            Err(TransportFailure {
                message: "timed out".into(),
            }),
            ok_reply("example [ASC]"),
        ]);
        let result = backend.complete(&request(0.0)).unwrap();
        assert_eq!(result.text, "example [ASC]");
        assert_eq!(
            result.usage,
            Usage {
                prompt_units: 12,
                output_units: 3
            }
        );
        let slept = slept.lock().unwrap();
        assert_eq!(slept.len(), 3);
        for (i, d) in slept.iter().enumerate() {
            let nominal = 500.0 * 2f64.powi(i as i32);
            let ms = d.as_secs_f64() * 1000.0;
            assert!(
                ms >= nominal * 0.8 - 1e-6 && ms <= nominal * 1.2 + 1e-6,
                "retry {i}: {ms}ms"
            );
        }
    }

    #[test]
    fn live_gives_up_after_cap() {
        let (backend, slept) = live((0..5).map(|_| status(500)).collect());
        match backend.complete(&request(0.0)) {
            Err(BackendError::AttemptsExhausted { attempts: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(slept.lock().unwrap().len(), 4);
    }

    #[test]
    fn live_does_not_retry_client_errors() {
        let (backend, slept) = live(vec![status(401)]);
        assert!(matches!(
            backend.complete(&request(0.0)),
            Err(BackendError::Http { status: 401, .. })
        ));
        assert!(slept.lock().unwrap().is_empty());
    }

    #[test]
    fn live_honors_retry_after() {
        let (backend, slept) = live(vec![
            Ok(HttpReply {
                status: 429,
                retry_after: Some(Duration::from_secs(3)),
                body: String::new(),
            }),
            ok_reply("None"),
        ]);
        backend.complete(&request(0.0)).unwrap();
        assert_eq!(slept.lock().unwrap()[0], Duration::from_secs(3));
    }

    #[test]
    fn live_rejects_malformed_bodies() {
        let (backend, _) = live(vec![Ok(HttpReply {
            status: 200,
            retry_after: None,
            body: "{}".into(),
        })]);
        assert!(matches!(
            backend.complete(&request(0.0)),
            Err(BackendError::Malformed(_))
        ));
    }

    #[test]
    fn nominal_schedule() {
        let p = RetryPolicy::default();
        let ms: Vec<u128> = (0..4).map(|i| p.nominal_delay(i).as_millis()).collect();
        assert_eq!(ms, [500, 1000, 2000, 4000]);
    }
}

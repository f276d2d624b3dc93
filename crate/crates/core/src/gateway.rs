//! Uniform chat-completion interface over a live HTTP endpoint and a
//! deterministic scripted backend.
//!
//! The scripted backend replays a FIFO queue of canned responses, which
//! makes every end-to-end test deterministic: identical (dataset, scripts,
//! config) produce identical traces byte-for-byte except wall-clock latency
//! fields. Scripted queues are per episode run; the HTTP client, retry
//! policy, and rate limiter are shared across concurrent runs.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tracing::warn;

use crate::prompt::PromptBundle;

/// Decoding parameters sent with every request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub model_name: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self {
            model_name: "gpt-4-vision-preview".to_string(),
            max_tokens: 300,
            temperature: 0.0,
        }
    }
}

/// Token accounting for one completion. `estimated` is set exactly when the
/// backend did not report usage and the byte heuristic filled in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageStats {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub estimated: bool,
}

impl UsageStats {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    /// Fold another call's usage into this one; mixed provenance counts as
    /// estimated.
    pub fn absorb(&mut self, other: &UsageStats) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.estimated |= other.estimated;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionResult {
    pub text: String,
    pub usage: UsageStats,
    pub latency_s: f64,
}

/// Rough byte heuristic: `ceil(bytes / 4)`. Deterministic and monotone
/// non-decreasing in text length.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

pub fn estimate_bundle_tokens(bundle: &PromptBundle) -> u64 {
    bundle.estimated_tokens()
}

#[derive(Clone, Debug, PartialEq)]
pub enum HttpAuth {
    None,
    Bearer(String),
}

#[derive(Clone, Debug)]
pub struct HttpConfig {
    pub base_url: String,
    pub auth: HttpAuth,
    /// When set, screenshot handles attach to messages as image parts.
    pub multimodal: bool,
}

/// Transport retry policy. Only transport failures, HTTP 5xx, and 429 are
/// retried; a well-formed model response is never retried.
#[derive(Clone, Copy, Debug)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

/// Serializes dispatch to a configured requests-per-minute budget.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    next_slot: tokio::sync::Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let requests = requests.max(1);
        Self {
            min_interval: Duration::from_secs_f64(60.0 / requests as f64),
            next_slot: tokio::sync::Mutex::new(None),
        }
    }

    async fn acquire(&self) {
        let wait_until = {
            let mut slot = self.next_slot.lock().await;
            let now = Instant::now();
            let at = match *slot {
                Some(next) if next > now => next,
                _ => now,
            };
            *slot = Some(at + self.min_interval);
            at
        };
        let now = Instant::now();
        if wait_until > now {
            tokio::time::sleep(wait_until - now).await;
        }
    }
}

/// A per-run FIFO queue of canned responses.
#[derive(Clone, Debug, Default)]
pub struct ScriptQueue {
    responses: Arc<Mutex<VecDeque<String>>>,
}

impl ScriptQueue {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses: Arc::new(Mutex::new(responses.into())),
        }
    }

    fn pop(&self) -> Option<String> {
        self.responses.lock().expect("script queue poisoned").pop_front()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("script queue poisoned").len()
    }
}

#[derive(Clone, Debug)]
pub enum BackendKind {
    Http(HttpConfig),
    Scripted(ScriptQueue),
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("scripted response queue is empty (test configuration bug)")]
    ScriptExhausted,
    #[error("authentication failed with status {status}")]
    Auth { status: u16 },
    #[error("backend returned status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("malformed backend response: {message}")]
    MalformedResponse { message: String },
}

/// The chat-completion gateway. Cheap to clone; clones share the HTTP
/// client, rate limiter, and (for scripted backends) the queue.
#[derive(Clone, Debug)]
pub struct Gateway {
    backend: BackendKind,
    retry: RetryPolicy,
    limiter: Option<Arc<RateLimiter>>,
    client: reqwest::Client,
}

impl Gateway {
    pub fn scripted(responses: Vec<String>) -> Self {
        Self::new(BackendKind::Scripted(ScriptQueue::new(responses)))
    }

    pub fn http(config: HttpConfig) -> Self {
        Self::new(BackendKind::Http(config))
    }

    pub fn new(backend: BackendKind) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
            limiter: None,
            client: reqwest::Client::new(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    /// A new gateway sharing transport configuration but owning the given
    /// fresh script queue. For HTTP backends this is a plain clone.
    pub fn for_episode(&self, responses: Option<Vec<String>>) -> Self {
        let mut g = self.clone();
        if let Some(responses) = responses {
            g.backend = BackendKind::Scripted(ScriptQueue::new(responses));
        }
        g
    }

    pub fn backend_id(&self) -> String {
        match &self.backend {
            BackendKind::Http(cfg) => format!("http:{}", cfg.base_url),
            BackendKind::Scripted(_) => "scripted".to_string(),
        }
    }

    pub fn is_scripted(&self) -> bool {
        matches!(self.backend, BackendKind::Scripted(_))
    }

    /// Run one completion. Latency is measured around the full request
    /// including retries.
    pub async fn complete(
        &self,
        bundle: &PromptBundle,
        cfg: &DecodingConfig,
    ) -> Result<CompletionResult, GatewayError> {
        let started = Instant::now();
        match &self.backend {
            BackendKind::Scripted(queue) => {
                let text = queue.pop().ok_or(GatewayError::ScriptExhausted)?;
                let usage = UsageStats {
                    prompt_tokens: estimate_bundle_tokens(bundle),
                    completion_tokens: estimate_tokens(&text),
                    estimated: true,
                };
                Ok(CompletionResult {
                    text,
                    usage,
                    latency_s: started.elapsed().as_secs_f64(),
                })
            }
            BackendKind::Http(http) => {
                let result = self.complete_http(http, bundle, cfg).await?;
                Ok(CompletionResult {
                    latency_s: started.elapsed().as_secs_f64(),
                    ..result
                })
            }
        }
    }

    async fn complete_http(
        &self,
        http: &HttpConfig,
        bundle: &PromptBundle,
        cfg: &DecodingConfig,
    ) -> Result<CompletionResult, GatewayError> {
        let url = format!("{}/chat/completions", http.base_url.trim_end_matches('/'));
        let body = request_body(http, bundle, cfg);
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts {
            if let Some(limiter) = &self.limiter {
                limiter.acquire().await;
            }
            let mut req = self.client.post(&url).json(&body);
            if let HttpAuth::Bearer(token) = &http.auth {
                req = req.bearer_auth(token);
            }
            match req.send().await {
                Err(e) => {
                    last_error = format!("transport error: {e}");
                }
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ChatResponse = resp.json().await.map_err(|e| {
                            GatewayError::MalformedResponse { message: e.to_string() }
                        })?;
                        return read_response(parsed, bundle);
                    }
                    let code = status.as_u16();
                    if code == 401 || code == 403 {
                        return Err(GatewayError::Auth { status: code });
                    }
                    let body_text = resp.text().await.unwrap_or_default();
                    if code == 429 || status.is_server_error() {
                        last_error = format!("status {code}: {body_text}");
                    } else {
                        return Err(GatewayError::Http { status: code, body: body_text });
                    }
                }
            }
            if attempt < self.retry.max_attempts {
                let delay = self.retry.delay(attempt);
                warn!(attempt, ?delay, "retrying after transient failure: {last_error}");
                tokio::time::sleep(delay).await;
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts: self.retry.max_attempts,
            last: last_error,
        })
    }
}

fn request_body(http: &HttpConfig, bundle: &PromptBundle, cfg: &DecodingConfig) -> serde_json::Value {
    let messages: Vec<serde_json::Value> = bundle
        .messages
        .iter()
        .map(|m| match (&m.image_ref, http.multimodal) {
            (Some(image), true) => json!({
                "role": m.role.as_str(),
                "content": [
                    {"type": "text", "text": m.text},
                    {"type": "image_url", "image_url": {"url": image}},
                ],
            }),
            _ => json!({"role": m.role.as_str(), "content": m.text}),
        })
        .collect();
    json!({
        "model": cfg.model_name,
        "messages": messages,
        "max_tokens": cfg.max_tokens,
        "temperature": cfg.temperature,
    })
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: MessageBody,
}

#[derive(Deserialize)]
struct MessageBody {
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    prompt_tokens: u64,
    completion_tokens: u64,
}

fn read_response(parsed: ChatResponse, bundle: &PromptBundle) -> Result<CompletionResult, GatewayError> {
    let text = parsed
        .choices
        .first()
        .and_then(|c| c.message.content.clone())
        .ok_or_else(|| GatewayError::MalformedResponse {
            message: "response carries no choices[0].message.content".to_string(),
        })?;
    let usage = match parsed.usage {
        Some(u) => UsageStats {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
            estimated: false,
        },
        None => UsageStats {
            prompt_tokens: estimate_bundle_tokens(bundle),
            completion_tokens: estimate_tokens(&text),
            estimated: true,
        },
    };
    Ok(CompletionResult { text, usage, latency_s: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{Message, StrategyKind};

    fn bundle(text: &str) -> PromptBundle {
        PromptBundle {
            messages: vec![Message::user(text.to_string())],
            strategy: StrategyKind::Np,
            turn: 0,
        }
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("8 bytes!"), 2);
        assert_eq!(estimate_tokens("abc"), 1);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    #[test]
    fn estimator_is_monotone_under_concat() {
        let pieces = ["", "a", "four", "a longer fragment", "unicode \u{2192} bytes"];
        for a in pieces {
            for b in pieces {
                let ab = format!("{a}{b}");
                assert!(estimate_tokens(&ab) >= estimate_tokens(a));
                assert!(estimate_tokens(&ab) >= estimate_tokens(b));
            }
        }
    }

    #[tokio::test]
    async fn scripted_passthrough_with_estimated_usage() {
        let g = Gateway::scripted(vec!["hello".to_string()]);
        let r = g.complete(&bundle("prompt text"), &DecodingConfig::default()).await.unwrap();
        assert_eq!(r.text, "hello");
        assert!(r.usage.estimated);
        assert_eq!(r.usage.completion_tokens, estimate_tokens("hello"));
        assert!(r.latency_s >= 0.0);
    }

    #[tokio::test]
    async fn scripted_queue_is_fifo_and_fails_loudly_when_empty() {
        let g = Gateway::scripted(vec!["one".into(), "two".into()]);
        let cfg = DecodingConfig::default();
        assert_eq!(g.complete(&bundle("p"), &cfg).await.unwrap().text, "one");
        assert_eq!(g.complete(&bundle("p"), &cfg).await.unwrap().text, "two");
        let err = g.complete(&bundle("p"), &cfg).await.unwrap_err();
        assert!(matches!(err, GatewayError::ScriptExhausted));
    }

    #[test]
    fn decoding_defaults() {
        let d = DecodingConfig::default();
        assert_eq!(d.max_tokens, 300);
        assert_eq!(d.temperature, 0.0);
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy { max_attempts: 3, base_delay: Duration::from_secs(1) };
        assert_eq!(p.delay(1), Duration::from_secs(1));
        assert_eq!(p.delay(2), Duration::from_secs(2));
        assert_eq!(p.delay(3), Duration::from_secs(4));
    }

    #[test]
    fn multimodal_body_attaches_image_parts() {
        let mut b = bundle("see screen");
        b.messages[0].image_ref = Some("data:image/png;base64,xyz".into());
        let http = HttpConfig {
            base_url: "http://x".into(),
            auth: HttpAuth::None,
            multimodal: true,
        };
        let body = request_body(&http, &b, &DecodingConfig::default());
        assert!(body["messages"][0]["content"].is_array());
        let text_only = HttpConfig { multimodal: false, ..http };
        let body = request_body(&text_only, &b, &DecodingConfig::default());
        assert_eq!(body["messages"][0]["content"], "see screen");
    }
}

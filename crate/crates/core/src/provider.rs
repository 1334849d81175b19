//! Provider abstractions for chat completion and text embedding, the
//! retry policy shared by both, and HTTP clients for the common
//! chat-completions / embeddings wire protocol.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::persona::Side;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    /// Worth retrying: timeouts, connection resets, 429 and 5xx.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider failure: {0}")]
    Fatal(String),
    /// The model declined to answer.
    #[error("provider refused: {0}")]
    Refusal(String),
    #[error("provider failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

/// Identifies a call for transcripts and scripted replay.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallTag {
    pub template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
}

impl CallTag {
    pub fn new(template: impl Into<String>) -> Self {
        Self {
            template: template.into(),
            ..Self::default()
        }
    }

    pub fn node(mut self, node: impl Into<String>) -> Self {
        self.node = Some(node.into());
        self
    }

    pub fn side(mut self, side: Side) -> Self {
        self.side = Some(side);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub tag: CallTag,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChatReply {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

pub trait ChatProvider: Send + Sync {
    fn id(&self) -> &str;
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

/// Exponential backoff with jitter. `max_retries` counts retries after the
/// first attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        if self.base_delay_ms == 0 {
            return Duration::ZERO;
        }
        let exp = self
            .base_delay_ms
            .saturating_mul(1u64 << retry.min(16))
            .min(self.max_delay_ms);
        let jitter = rand::thread_rng().gen_range(0..=exp / 2);
        Duration::from_millis(exp / 2 + jitter)
    }

    /// Runs `op` until it succeeds, fails permanently, or retries run out.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
        let mut attempt = 0;
        loop {
            match op() {
                Err(ProviderError::Transient(msg)) => {
                    if attempt >= self.max_retries {
                        return Err(ProviderError::Exhausted {
                            attempts: attempt + 1,
                            last: msg,
                        });
                    }
                    tracing::warn!(attempt, "transient provider failure, retrying: {msg}");
                    std::thread::sleep(self.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Endpoint settings for an HTTP provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

fn endpoint(base: &str, suffix: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(suffix) {
        base.to_string()
    } else {
        format!("{base}/{suffix}")
    }
}

fn build_client(config: &EndpointConfig) -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(config.timeout_secs))
        .build()
        .map_err(|e| ProviderError::Fatal(format!("http client: {e}")))
}

fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<Value, ProviderError> {
    let mut req = client.post(url).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req.send().map_err(|e| {
        if e.is_timeout() || e.is_connect() || e.is_request() {
            ProviderError::Transient(e.to_string())
        } else {
            ProviderError::Fatal(e.to_string())
        }
    })?;
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| ProviderError::Transient(format!("reading body: {e}")))?;
    if status.as_u16() == 429 || status.is_server_error() {
        return Err(ProviderError::Transient(format!("{status}: {text}")));
    }
    if !status.is_success() {
        return Err(ProviderError::Fatal(format!("{status}: {text}")));
    }
    serde_json::from_str(&text).map_err(|e| ProviderError::Fatal(format!("bad JSON from {url}: {e}")))
}

/// Chat provider for any `/chat/completions` endpoint.
pub struct HttpChatProvider {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    id: String,
}

impl HttpChatProvider {
    pub fn new(config: EndpointConfig) -> Result<Self, ProviderError> {
        let client = build_client(&config)?;
        let id = format!("chat:{}@{}", config.model, config.url);
        Ok(Self { config, client, id })
    }
}

/// Extracts the reply from a chat-completions response body.
pub fn parse_chat_response(body: &Value) -> Result<ChatReply, ProviderError> {
    let choice = body
        .pointer("/choices/0")
        .ok_or_else(|| ProviderError::Fatal("response has no choices".into()))?;
    if let Some(refusal) = choice.pointer("/message/refusal").and_then(Value::as_str) {
        return Err(ProviderError::Refusal(refusal.to_string()));
    }
    if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
        return Err(ProviderError::Refusal("content filtered".into()));
    }
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Fatal("response has no message content".into()))?;
    Ok(ChatReply {
        text: text.to_string(),
        prompt_tokens: body.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        completion_tokens: body.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    })
}

impl ChatProvider for HttpChatProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        });
        let url = endpoint(&self.config.url, "chat/completions");
        let resp = post_json(&self.client, &url, self.config.api_key.as_deref(), &body)?;
        parse_chat_response(&resp)
    }
}

/// Embedding provider for any `/embeddings` endpoint.
pub struct HttpEmbeddingProvider {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    id: String,
}

impl HttpEmbeddingProvider {
    pub fn new(config: EndpointConfig) -> Result<Self, ProviderError> {
        let client = build_client(&config)?;
        let id = format!("embed:{}@{}", config.model, config.url);
        Ok(Self { config, client, id })
    }
}

pub fn parse_embedding_response(body: &Value, expected: usize) -> Result<Vec<Vec<f64>>, ProviderError> {
    let data = body
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::Fatal("embedding response has no data".into()))?;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; expected];
    for (pos, item) in data.iter().enumerate() {
        let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
        let values = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Fatal(format!("data[{pos}] has no embedding")))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| ProviderError::Fatal(format!("data[{pos}] has a non-number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let slot = out
            .get_mut(index)
            .ok_or_else(|| ProviderError::Fatal(format!("embedding index {index} out of range")))?;
        *slot = Some(values);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| ProviderError::Fatal(format!("missing embedding {i}"))))
        .collect()
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({"model": self.config.model, "input": texts});
        let url = endpoint(&self.config.url, "embeddings");
        let resp = post_json(&self.client, &url, self.config.api_key.as_deref(), &body)?;
        parse_embedding_response(&resp, texts.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn retries_transient_then_succeeds() {
        let calls = Cell::new(0);
        let out = RetryPolicy::immediate(3).run(|| {
            calls.set(calls.get() + 1);
            if calls.get() < 3 {
                Err(ProviderError::Transient("503".into()))
            } else {
                Ok(7)
            }
        });
        assert_eq!(out, Ok(7));
        assert_eq!(calls.get(), 3);
    }

    #[test]
    fn exhausts_after_max_retries() {
        let calls = Cell::new(0);
        let out: Result<(), _> = RetryPolicy::immediate(3).run(|| {
            calls.set(calls.get() + 1);
            Err(ProviderError::Transient("timeout".into()))
        });
        assert_eq!(calls.get(), 4);
        assert!(matches!(out, Err(ProviderError::Exhausted { attempts: 4, .. })));
    }

    #[test]
    fn fatal_is_not_retried() {
        let calls = Cell::new(0);
        let out: Result<(), _> = RetryPolicy::immediate(3).run(|| {
            calls.set(calls.get() + 1);
            Err(ProviderError::Fatal("401".into()))
        });
        assert_eq!(calls.get(), 1);
        assert!(matches!(out, Err(ProviderError::Fatal(_))));
    }

    #[test]
    fn backoff_grows_and_is_capped() {
        let p = RetryPolicy {
            max_retries: 3,
            base_delay_ms: 100,
            max_delay_ms: 300,
        };
        assert!(p.delay(0) >= Duration::from_millis(50) && p.delay(0) <= Duration::from_millis(100));
        assert!(p.delay(5) <= Duration::from_millis(300));
    }

    #[test]
    fn parses_chat_body() {
        let body = json!({
            "choices": [{"message": {"role": "assistant", "content": "OK"}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 1}
        });
        let reply = parse_chat_response(&body).unwrap();
        assert_eq!(reply.text, "OK");
        assert_eq!(reply.prompt_tokens, Some(12));
    }

    #[test]
    fn refusal_is_content_error() {
        let body = json!({"choices": [{"message": {"content": null, "refusal": "no"}}]});
        assert_eq!(parse_chat_response(&body), Err(ProviderError::Refusal("no".into())));
        let body = json!({"choices": [{"message": {"content": ""}, "finish_reason": "content_filter"}]});
        assert!(matches!(parse_chat_response(&body), Err(ProviderError::Refusal(_))));
    }

    #[test]
    fn embedding_body_reordered_by_index() {
        let body = json!({"data": [
            {"index": 1, "embedding": [0.0, 1.0]},
            {"index": 0, "embedding": [1.0, 0.0]}
        ]});
        let v = parse_embedding_response(&body, 2).unwrap();
        assert_eq!(v, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_embedding_response(&body, 3).is_err());
    }

    #[test]
    fn endpoint_suffix_is_idempotent() {
        assert_eq!(endpoint("http://h/v1/", "embeddings"), "http://h/v1/embeddings");
        assert_eq!(
            endpoint("http://h/v1/embeddings", "embeddings"),
            "http://h/v1/embeddings"
        );
    }
}

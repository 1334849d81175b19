//! Offline providers: scripted chat replay, closure-backed chat, and a
//! deterministic feature-hashing embedder.
//!
//! A mock script is YAML:
//!
//! ```yaml
//! chat:
//!   - template: persona_generate_arguments   # required
//!     node: "0"                              # optional exact node id
//!     side: author_0                         # optional
//!     variant: tod                           # optional
//!     reply: |
//!       ```json
//!       {"arguments": [...]}
//!       ```
//!   - template: persona_relevance
//!     repeat: true                           # never consumed
//!     reply: '{"supports_claim": "Yes", ...}'
//!   - template: mod_summarize
//!     fail: transport                        # transport | transient | refusal
//! embeddings:
//!   dimension: 64
//!   vectors:
//!     "some exact text": [0.0, 1.0]
//! ```
//!
//! Each request takes the first entry, in file order, that matches and has
//! not been consumed.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::persona::Side;
use crate::provider::{ChatProvider, ChatReply, ChatRequest, EmbeddingProvider, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedFailure {
    /// Permanent failure; surfaces as transport exhaustion.
    Transport,
    /// Retryable failure.
    Transient,
    Refusal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<ScriptedFailure>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat: bool,
}

impl ScriptEntry {
    pub fn reply(template: &str, reply: &str) -> Self {
        Self {
            template: template.to_string(),
            node: None,
            side: None,
            variant: None,
            reply: Some(reply.to_string()),
            fail: None,
            repeat: false,
        }
    }

    fn matches(&self, request: &ChatRequest, variant: Option<&str>) -> bool {
        self.template == request.tag.template
            && self.node.as_ref().is_none_or(|n| request.tag.node.as_ref() == Some(n))
            && self.side.is_none_or(|s| request.tag.side == Some(s))
            && self.variant.as_deref().is_none_or(|v| variant == Some(v))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingScript {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub vectors: BTreeMap<String, Vec<f64>>,
}

fn default_dimension() -> usize {
    64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub chat: Vec<ScriptEntry>,
    #[serde(default)]
    pub embeddings: Option<EmbeddingScript>,
}

impl MockScript {
    pub fn parse(text: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("invalid mock script {}: {e}", path.display()))
    }

    pub fn embedder(&self) -> ScriptedEmbeddings {
        let script = self.embeddings.clone().unwrap_or(EmbeddingScript {
            dimension: default_dimension(),
            vectors: BTreeMap::new(),
        });
        let mut e = ScriptedEmbeddings::hashing(script.dimension.max(1));
        for (text, v) in script.vectors {
            e = e.with_vector(&text, v);
        }
        e
    }
}

/// Replays a script of chat replies.
pub struct ScriptedChat {
    entries: Vec<ScriptEntry>,
    consumed: Mutex<Vec<bool>>,
    requests: Mutex<Vec<ChatRequest>>,
    variant: Option<String>,
}

impl ScriptedChat {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let consumed = Mutex::new(vec![false; entries.len()]);
        Self {
            entries,
            consumed,
            requests: Mutex::new(Vec::new()),
            variant: None,
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self::new(pairs.into_iter().map(|(t, r)| ScriptEntry::reply(t, r)).collect())
    }

    pub fn from_script(script: &MockScript, variant: Option<&str>) -> Self {
        let mut chat = Self::new(script.chat.clone());
        chat.variant = variant.map(str::to_string);
        chat
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    /// Non-repeating entries that were never used.
    pub fn unconsumed(&self) -> usize {
        let consumed = self.consumed.lock().unwrap();
        self.entries
            .iter()
            .zip(consumed.iter())
            .filter(|(e, used)| !e.repeat && !**used)
            .count()
    }
}

impl ChatProvider for ScriptedChat {
    fn id(&self) -> &str {
        "mock-chat"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        self.requests.lock().unwrap().push(request.clone());
        let entry = {
            let mut consumed = self.consumed.lock().unwrap();
            let found = self
                .entries
                .iter()
                .enumerate()
                .find(|(i, e)| (e.repeat || !consumed[*i]) && e.matches(request, self.variant.as_deref()));
            match found {
                Some((i, e)) => {
                    if !e.repeat {
                        consumed[i] = true;
                    }
                    e.clone()
                }
                None => {
                    return Err(ProviderError::Fatal(format!(
                        "mock script has no reply left for `{}` (node {}, side {})",
                        request.tag.template,
                        request.tag.node.as_deref().unwrap_or("-"),
                        request.tag.side.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                    )))
                }
            }
        };
        match (entry.fail, entry.reply) {
            (Some(ScriptedFailure::Transport), _) => Err(ProviderError::Fatal("scripted transport failure".into())),
            (Some(ScriptedFailure::Transient), _) => Err(ProviderError::Transient("scripted transient failure".into())),
            (Some(ScriptedFailure::Refusal), _) => Err(ProviderError::Refusal("scripted refusal".into())),
            (None, Some(text)) => Ok(ChatReply {
                text,
                prompt_tokens: None,
                completion_tokens: None,
            }),
            (None, None) => Ok(ChatReply::default()),
        }
    }
}

type ChatFn = dyn Fn(&ChatRequest) -> Result<ChatReply, ProviderError> + Send + Sync;

/// Chat provider backed by a closure.
pub struct FnChat {
    f: Box<ChatFn>,
    calls: AtomicUsize,
}

impl FnChat {
    pub fn new(f: impl Fn(&ChatRequest) -> Result<ChatReply, ProviderError> + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Convenience: the closure returns reply text.
    pub fn text(f: impl Fn(&ChatRequest) -> String + Send + Sync + 'static) -> Self {
        Self::new(move |r| {
            Ok(ChatReply {
                text: f(r),
                ..ChatReply::default()
            })
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatProvider for FnChat {
    fn id(&self) -> &str {
        "fn-chat"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(request)
    }
}

/// Deterministic embeddings: exact-text overrides, otherwise signed feature
/// hashing of lowercase word tokens.
pub struct ScriptedEmbeddings {
    dimension: usize,
    overrides: BTreeMap<String, Vec<f64>>,
    failure: Option<String>,
    calls: AtomicUsize,
    texts: AtomicUsize,
}

impl ScriptedEmbeddings {
    pub fn hashing(dimension: usize) -> Self {
        Self {
            dimension,
            overrides: BTreeMap::new(),
            failure: None,
            calls: AtomicUsize::new(0),
            texts: AtomicUsize::new(0),
        }
    }

    pub fn with_vector(mut self, text: &str, vector: Vec<f64>) -> Self {
        self.overrides.insert(text.to_string(), vector);
        self
    }

    /// Every call fails transiently with `message`.
    pub fn failing(mut self, message: &str) -> Self {
        self.failure = Some(message.to_string());
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn texts_embedded(&self) -> usize {
        self.texts.load(Ordering::SeqCst)
    }

    pub fn hash_embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let digest = Sha256::digest(token.as_bytes());
            let h = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
            let index = (h % self.dimension as u64) as usize;
            let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[index] += sign;
        }
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        v
    }
}

impl EmbeddingProvider for ScriptedEmbeddings {
    fn id(&self) -> &str {
        "mock-embeddings"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(msg) = &self.failure {
            return Err(ProviderError::Transient(msg.clone()));
        }
        self.texts.fetch_add(texts.len(), Ordering::SeqCst);
        Ok(texts
            .iter()
            .map(|t| self.overrides.get(t).cloned().unwrap_or_else(|| self.hash_embed(t)))
            .collect())
    }
}

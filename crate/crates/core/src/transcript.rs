//! Append-only log of every provider call and degradation note in a run.

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::provider::CallTag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub tag: CallTag,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    /// 0 for the first request, n for the n-th structured-output repair.
    pub repair_round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Chat(ChatRecord),
    Embedding {
        provider: String,
        texts: usize,
        /// Texts not already cached, i.e. sent to the provider.
        fetched: usize,
    },
    Note {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        node: Option<String>,
        message: String,
    },
}

/// Cloning shares the same log. Use [`Transcript::fork`] for an independent
/// buffer that is later merged with [`Transcript::absorb`].
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    entries: Arc<Mutex<Vec<TranscriptEntry>>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fork(&self) -> Self {
        Self::new()
    }

    pub fn absorb(&self, other: &Transcript) {
        let taken = std::mem::take(&mut *other.entries.lock().unwrap());
        self.entries.lock().unwrap().extend(taken);
    }

    pub fn push(&self, entry: TranscriptEntry) {
        self.entries.lock().unwrap().push(entry);
    }

    pub fn record_chat(&self, record: ChatRecord) {
        self.push(TranscriptEntry::Chat(record));
    }

    pub fn record_embedding(&self, provider: &str, texts: usize, fetched: usize) {
        self.push(TranscriptEntry::Embedding {
            provider: provider.to_string(),
            texts,
            fetched,
        });
    }

    pub fn note(&self, node: Option<&str>, message: impl Into<String>) {
        let message = message.into();
        tracing::info!(node = node.unwrap_or("-"), "{message}");
        self.push(TranscriptEntry::Note {
            node: node.map(str::to_string),
            message,
        });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().unwrap().clone()
    }

    pub fn chat_records(&self) -> Vec<ChatRecord> {
        self.entries
            .lock()
            .unwrap()
            .iter()
            .filter_map(|e| match e {
                TranscriptEntry::Chat(r) => Some(r.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn chat_calls(&self) -> usize {
        self.chat_records().len()
    }

    /// Embedding requests that reached the provider.
    pub fn embedding_calls(&self) -> usize {
        self.entries
            .lock()
            .unwrap()
            .iter()
            .filter(|e| matches!(e, TranscriptEntry::Embedding { fetched, .. } if *fetched > 0))
            .count()
    }

    pub fn notes(&self) -> Vec<String> {
        self.entries
            .lock()
            .unwrap()
            .iter()
            .filter_map(|e| match e {
                TranscriptEntry::Note { message, .. } => Some(message.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn to_markdown(&self, title: &str) -> String {
        render_markdown(title, &self.entries())
    }
}

fn fence(out: &mut String, body: &str) {
    out.push_str("~~~~text\n");
    out.push_str(body);
    if !body.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("~~~~\n");
}

pub fn render_markdown(title: &str, entries: &[TranscriptEntry]) -> String {
    let mut out = format!("# {title}\n");
    for (i, entry) in entries.iter().enumerate() {
        let n = i + 1;
        out.push('\n');
        match entry {
            TranscriptEntry::Chat(r) => {
                let mut scope = Vec::new();
                if let Some(node) = &r.tag.node {
                    scope.push(format!("node {node}"));
                }
                if let Some(side) = r.tag.side {
                    scope.push(side.to_string());
                }
                if r.repair_round > 0 {
                    scope.push(format!("repair {}", r.repair_round));
                }
                let scope = if scope.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", scope.join(", "))
                };
                let _ = writeln!(out, "## {n}. chat `{}`{scope}\n", r.tag.template);
                let tokens = match (r.prompt_tokens, r.completion_tokens) {
                    (Some(p), Some(c)) => format!("{p}/{c}"),
                    _ => "n/a".into(),
                };
                let _ = writeln!(
                    out,
                    "temperature {}, top_p {}, max_tokens {}, latency {} ms, tokens {tokens}\n",
                    r.temperature, r.top_p, r.max_tokens, r.latency_ms
                );
                out.push_str("### Prompt\n\n");
                fence(&mut out, &r.prompt);
                match (&r.reply, &r.error) {
                    (Some(reply), _) => {
                        out.push_str("\n### Reply\n\n");
                        fence(&mut out, reply);
                    }
                    (None, Some(err)) => {
                        let _ = writeln!(out, "\n### Error\n\n{err}");
                    }
                    (None, None) => {}
                }
            }
            TranscriptEntry::Embedding {
                provider,
                texts,
                fetched,
            } => {
                let _ = writeln!(
                    out,
                    "## {n}. embeddings `{provider}`\n\n{texts} texts, {fetched} fetched"
                );
            }
            TranscriptEntry::Note { node, message } => {
                let scope = node.as_deref().map(|n| format!(" (node {n})")).unwrap_or_default();
                let _ = writeln!(out, "## {n}. note{scope}\n\n{message}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fork_and_absorb_preserve_order() {
        let main = Transcript::new();
        main.note(None, "first");
        let a = main.fork();
        let b = main.fork();
        b.note(Some("0.2"), "b");
        a.note(Some("0.1"), "a");
        main.absorb(&a);
        main.absorb(&b);
        assert_eq!(main.notes(), ["first", "a", "b"]);
        assert!(a.entries().is_empty());
    }

    #[test]
    fn clones_share_the_log() {
        let t = Transcript::new();
        let c = t.clone();
        c.record_embedding("e", 3, 3);
        c.record_embedding("e", 3, 0);
        assert_eq!(t.entries().len(), 2);
        assert_eq!(t.embedding_calls(), 1);
    }

    #[test]
    fn markdown_render() {
        let t = Transcript::new();
        t.record_chat(ChatRecord {
            tag: CallTag::new("mod_summarize").node("0"),
            temperature: 0.4,
            top_p: 0.99,
            max_tokens: 10,
            prompt: "P".into(),
            reply: Some("R\n".into()),
            error: None,
            latency_ms: 0,
            prompt_tokens: Some(1),
            completion_tokens: Some(1),
            repair_round: 0,
        });
        let md = t.to_markdown("Run");
        assert_eq!(
            md,
            "# Run\n\n## 1. chat `mod_summarize` (node 0)\n\ntemperature 0.4, top_p 0.99, max_tokens 10, latency 0 ms, tokens 1/1\n\n### Prompt\n\n~~~~text\nP\n~~~~\n\n### Reply\n\n~~~~text\nR\n~~~~\n"
        );
    }
}

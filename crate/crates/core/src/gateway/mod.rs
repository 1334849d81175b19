//! Prompt rendering, per-task sampling, provider calls with retries, and
//! structured-output parsing with a bounded repair loop.

mod structured;
mod templates;

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{CallTag, ChatProvider, ChatRequest, ProviderError, RetryPolicy};
use crate::transcript::{ChatRecord, Transcript};

pub use structured::{
    extract_json, ArgumentDraft, ArgumentsSchema, ExpansionSchema, ExpansionVerdict, RelevanceSchema, RelevanceVerdict,
    Schema, SubtopicDraft, SubtopicsSchema,
};
pub use templates::{bindings, render_prompt, unused_bindings, Bindings, RenderError, TemplateId};

/// Default nucleus mass. The alternative reading of "top 1% of tokens" is 0.01.
pub const DEFAULT_NUCLEUS_MASS: f64 = 0.99;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;
/// Structured-output repair rounds after the first attempt.
pub const DEFAULT_REPAIR_BUDGET: u32 = 2;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("`{template}` call failed: {source}")]
    Transport {
        template: String,
        #[source]
        source: ProviderError,
    },
    #[error("`{template}` was refused: {message}")]
    Content { template: String, message: String },
    #[error("`{template}` produced no valid structured reply after {} attempts: {last_error}", attempts.len())]
    Structured {
        template: String,
        attempts: Vec<String>,
        last_error: String,
    },
    #[error("invalid sampling profile for `{template}`: {reason}")]
    Profile { template: String, reason: String },
}

impl GatewayError {
    /// True for failures that should abort a run rather than degrade a node.
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingProfile {
    pub temperature: f64,
    #[serde(default = "default_nucleus")]
    pub nucleus_mass: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_nucleus() -> f64 {
    DEFAULT_NUCLEUS_MASS
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

impl SamplingProfile {
    pub fn with_temperature(temperature: f64) -> Self {
        Self {
            temperature,
            nucleus_mass: DEFAULT_NUCLEUS_MASS,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self, template: TemplateId) -> Result<(), GatewayError> {
        let fail = |reason: String| {
            Err(GatewayError::Profile {
                template: template.to_string(),
                reason,
            })
        };
        if !(0.0..=0.5).contains(&self.temperature) {
            return fail(format!("temperature {} outside [0, 0.5]", self.temperature));
        }
        if !(self.nucleus_mass > 0.0 && self.nucleus_mass <= 1.0) {
            return fail(format!("nucleus_mass {} outside (0, 1]", self.nucleus_mass));
        }
        if self.max_tokens == 0 {
            return fail("max_tokens must be positive".into());
        }
        Ok(())
    }
}

/// Default temperature per task.
pub fn default_temperature(template: TemplateId) -> f64 {
    match template {
        TemplateId::PersonaGenerateArguments => 0.3,
        TemplateId::PersonaRelevance => 0.0,
        TemplateId::PersonaPresent => 0.1,
        TemplateId::PersonaRespond => 0.4,
        TemplateId::PersonaRevise => 0.4,
        TemplateId::ModGenerateTopics => 0.3,
        TemplateId::ModIsExpand => 0.1,
        TemplateId::ModSummarize => 0.4,
        TemplateId::BaselineSingleStage | TemplateId::BaselinePaperSummary | TemplateId::BaselineContrastive => 0.4,
    }
}

/// Sampling profile per template; missing entries fall back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SamplingTable(BTreeMap<TemplateId, SamplingProfile>);

impl Default for SamplingTable {
    fn default() -> Self {
        Self(
            TemplateId::DEBATE
                .into_iter()
                .chain(TemplateId::BASELINE)
                .map(|t| (t, SamplingProfile::with_temperature(default_temperature(t))))
                .collect(),
        )
    }
}

impl SamplingTable {
    pub fn profile(&self, template: TemplateId) -> SamplingProfile {
        self.0
            .get(&template)
            .copied()
            .unwrap_or_else(|| SamplingProfile::with_temperature(default_temperature(template)))
    }

    pub fn set(&mut self, template: TemplateId, profile: SamplingProfile) {
        self.0.insert(template, profile);
    }

    /// Applies one nucleus mass / token limit to every task.
    pub fn set_all(&mut self, nucleus_mass: Option<f64>, max_tokens: Option<u32>) {
        for t in TemplateId::DEBATE.into_iter().chain(TemplateId::BASELINE) {
            let mut p = self.profile(t);
            if let Some(m) = nucleus_mass {
                p.nucleus_mass = m;
            }
            if let Some(m) = max_tokens {
                p.max_tokens = m;
            }
            self.0.insert(t, p);
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        self.0.iter().try_for_each(|(t, p)| p.validate(*t))
    }
}

/// Counting semaphore bounding in-flight provider requests.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(limit: usize) -> Self {
        Self {
            available: Mutex::new(limit.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.available.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredReply<T> {
    pub raw_text: String,
    pub parsed: T,
    pub repair_attempts: u32,
}

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub sampling: SamplingTable,
    pub retry: RetryPolicy,
    pub repair_budget: u32,
    pub max_in_flight: usize,
    /// When false, latencies are recorded as zero so transcripts are byte-stable.
    pub record_latency: bool,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            sampling: SamplingTable::default(),
            retry: RetryPolicy::default(),
            repair_budget: DEFAULT_REPAIR_BUDGET,
            max_in_flight: 4,
            record_latency: true,
        }
    }
}

/// Shared front end to a chat provider.
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    options: GatewayOptions,
    limiter: Limiter,
}

fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>, options: GatewayOptions) -> Self {
        let limiter = Limiter::new(options.max_in_flight);
        Self {
            provider,
            options,
            limiter,
        }
    }

    pub fn options(&self) -> &GatewayOptions {
        &self.options
    }

    pub fn profile(&self, template: TemplateId) -> SamplingProfile {
        self.options.sampling.profile(template)
    }

    /// The request that would be sent for `template`.
    pub fn request(&self, template: TemplateId, prompt: String, tag: CallTag) -> ChatRequest {
        let p = self.profile(template);
        ChatRequest {
            prompt,
            temperature: p.temperature,
            top_p: p.nucleus_mass,
            max_tokens: p.max_tokens,
            tag: CallTag {
                template: template.to_string(),
                ..tag
            },
        }
    }

    fn send(&self, request: &ChatRequest, repair_round: u32, transcript: &Transcript) -> Result<String, GatewayError> {
        let started = Instant::now();
        let result = {
            let _slot = self.limiter.acquire();
            self.options.retry.run(|| self.provider.chat(request))
        };
        let latency_ms = if self.options.record_latency {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        let mut record = ChatRecord {
            tag: request.tag.clone(),
            temperature: request.temperature,
            top_p: request.top_p,
            max_tokens: request.max_tokens,
            prompt: request.prompt.clone(),
            reply: None,
            error: None,
            latency_ms,
            prompt_tokens: None,
            completion_tokens: None,
            repair_round,
        };
        match result {
            Ok(reply) => {
                record.prompt_tokens = Some(reply.prompt_tokens.unwrap_or_else(|| approx_tokens(&request.prompt)));
                record.completion_tokens = Some(reply.completion_tokens.unwrap_or_else(|| approx_tokens(&reply.text)));
                record.reply = Some(reply.text.clone());
                transcript.record_chat(record);
                Ok(reply.text)
            }
            Err(err) => {
                record.error = Some(err.to_string());
                transcript.record_chat(record);
                let template = request.tag.template.clone();
                Err(match err {
                    ProviderError::Refusal(message) => GatewayError::Content { template, message },
                    source => GatewayError::Transport { template, source },
                })
            }
        }
    }

    /// Sends one rendered prompt and returns the reply text.
    pub fn complete(
        &self,
        template: TemplateId,
        prompt: String,
        tag: CallTag,
        transcript: &Transcript,
    ) -> Result<String, GatewayError> {
        let request = self.request(template, prompt, tag);
        self.send(&request, 0, transcript)
    }

    /// Sends a prompt whose reply must satisfy `schema`, re-prompting with the
    /// validation error up to the repair budget.
    pub fn complete_structured<S: Schema>(
        &self,
        prompt: String,
        schema: &S,
        tag: CallTag,
        transcript: &Transcript,
    ) -> Result<StructuredReply<S::Output>, GatewayError> {
        let template = schema.template();
        let mut request = self.request(template, prompt.clone(), tag);
        let mut attempts = Vec::new();
        let mut last_error = String::new();
        for round in 0..=self.options.repair_budget {
            if round > 0 {
                request.prompt = repair_prompt(&prompt, attempts.last().map(String::as_str).unwrap_or(""), &last_error);
            }
            let raw = self.send(&request, round, transcript)?;
            match extract_json(&raw).and_then(|v| schema.parse(&v)) {
                Ok(parsed) => {
                    return Ok(StructuredReply {
                        raw_text: raw,
                        parsed,
                        repair_attempts: round,
                    })
                }
                Err(e) => {
                    tracing::debug!(%template, round, "structured reply rejected: {e}");
                    last_error = e;
                    attempts.push(raw);
                }
            }
        }
        Err(GatewayError::Structured {
            template: template.to_string(),
            attempts,
            last_error,
        })
    }
}

/// The original prompt followed by the rejected reply and the reason.
pub fn repair_prompt(original: &str, rejected: &str, error: &str) -> String {
    format!(
        "{original}\n\nYour previous reply could not be used because: {error}\n\nPrevious reply:\n{rejected}\n\nReply again with a single JSON object inside one ```json fenced block that fixes this problem."
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{FnChat, ScriptedChat};
    use crate::provider::ChatReply;

    fn gateway(provider: Arc<dyn ChatProvider>) -> Gateway {
        Gateway::new(
            provider,
            GatewayOptions {
                retry: RetryPolicy::immediate(3),
                record_latency: false,
                ..GatewayOptions::default()
            },
        )
    }

    #[test]
    fn temperature_table() {
        let t = SamplingTable::default();
        let temps: Vec<f64> = TemplateId::DEBATE.iter().map(|&id| t.profile(id).temperature).collect();
        // mod_generate_topics, mod_is_expand, mod_summarize, persona_generate_arguments,
        // persona_relevance, persona_present, persona_respond, persona_revise
        assert_eq!(temps, [0.3, 0.1, 0.4, 0.3, 0.0, 0.1, 0.4, 0.4]);
        assert!(t.validate().is_ok());
    }

    #[test]
    fn profile_bounds() {
        let bad = SamplingProfile::with_temperature(0.7);
        assert!(bad.validate(TemplateId::ModSummarize).is_err());
        let bad = SamplingProfile {
            nucleus_mass: 0.0,
            ..SamplingProfile::with_temperature(0.1)
        };
        assert!(bad.validate(TemplateId::ModSummarize).is_err());
    }

    #[test]
    fn complete_returns_scripted_reply_and_records() {
        let provider = Arc::new(ScriptedChat::from_pairs([("mod_summarize", "OK")]));
        let gw = gateway(provider.clone());
        let t = Transcript::new();
        let out = gw
            .complete(TemplateId::ModSummarize, "P".into(), CallTag::default(), &t)
            .unwrap();
        assert_eq!(out, "OK");
        let rec = &t.chat_records()[0];
        assert_eq!(rec.tag.template, "mod_summarize");
        assert_eq!(rec.temperature, 0.4);
        assert_eq!(rec.top_p, 0.99);
        assert_eq!(rec.completion_tokens, Some(1));
    }

    #[test]
    fn relevance_requests_temperature_zero() {
        let provider = Arc::new(ScriptedChat::from_pairs([("persona_relevance", "x")]));
        let gw = gateway(provider.clone());
        gw.complete(
            TemplateId::PersonaRelevance,
            "P".into(),
            CallTag::default(),
            &Transcript::new(),
        )
        .unwrap();
        assert_eq!(provider.requests()[0].temperature, 0.0);
    }

    #[test]
    fn refusal_is_content_error() {
        let provider = Arc::new(FnChat::new(|_| Err(ProviderError::Refusal("nope".into()))));
        let err = gateway(provider)
            .complete(
                TemplateId::ModSummarize,
                "P".into(),
                CallTag::default(),
                &Transcript::new(),
            )
            .unwrap_err();
        assert!(matches!(err, GatewayError::Content { .. }));
    }

    #[test]
    fn transport_exhaustion_after_retries() {
        let provider = Arc::new(FnChat::new(|_| Err(ProviderError::Transient("503".into()))));
        let err = gateway(provider.clone())
            .complete(
                TemplateId::ModSummarize,
                "P".into(),
                CallTag::default(),
                &Transcript::new(),
            )
            .unwrap_err();
        assert!(err.is_transport());
        assert_eq!(provider.calls(), 4);
    }

    #[test]
    fn structured_repair_then_success() {
        let provider = Arc::new(ScriptedChat::from_pairs([
            (
                "persona_generate_arguments",
                r#"{"arguments": [{"argument_title": "t", "description": "d"}]}"#,
            ),
            (
                "persona_generate_arguments",
                r#"```json
{"arguments": [{"argument_title": "t", "description": "d", "evidence": [1, 2]}]}
```"#,
            ),
        ]));
        let gw = gateway(provider.clone());
        let t = Transcript::new();
        let reply = gw
            .complete_structured(
                "P".into(),
                &ArgumentsSchema { k: 3, evidence_len: 5 },
                CallTag::default(),
                &t,
            )
            .unwrap();
        assert_eq!(reply.repair_attempts, 1);
        assert_eq!(reply.parsed[0].evidence, [1, 2]);
        let second = &provider.requests()[1].prompt;
        assert!(second
            .starts_with("P\n\nYour previous reply could not be used because: argument 0: missing \"evidence\" list"));
        assert_eq!(t.chat_records()[1].repair_round, 1);
    }

    #[test]
    fn structured_exhaustion_keeps_all_attempts() {
        let provider = Arc::new(FnChat::new(|_| {
            Ok(ChatReply {
                text: "not json".into(),
                ..ChatReply::default()
            })
        }));
        let err = gateway(provider.clone())
            .complete_structured("P".into(), &RelevanceSchema, CallTag::default(), &Transcript::new())
            .unwrap_err();
        match err {
            GatewayError::Structured { attempts, .. } => assert_eq!(attempts.len(), 3),
            other => panic!("{other}"),
        }
        assert_eq!(provider.calls(), 3);
    }

    #[test]
    fn limiter_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let (l, p) = (live.clone(), peak.clone());
        let provider = Arc::new(FnChat::new(move |_| {
            let now = l.fetch_add(1, Ordering::SeqCst) + 1;
            p.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(5));
            l.fetch_sub(1, Ordering::SeqCst);
            Ok(ChatReply::default())
        }));
        let gw = Gateway::new(
            provider,
            GatewayOptions {
                max_in_flight: 2,
                ..GatewayOptions::default()
            },
        );
        let t = Transcript::new();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    gw.complete(TemplateId::ModSummarize, "P".into(), CallTag::default(), &t)
                        .unwrap()
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(t.chat_calls(), 8);
    }
}

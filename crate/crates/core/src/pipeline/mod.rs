//! Runs one paper pair through one of the five variants.

mod output;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{segment_paper, split_sentences, PairSample, Segment, DEFAULT_SEGMENT_SENTENCES};
use crate::gateway::{bindings, render_prompt, Gateway, GatewayError, GatewayOptions, SamplingTable, TemplateId};
use crate::mock::{MockScript, ScriptedChat};
use crate::moderator::{
    claims_block, generate_subtopics, judge_expansion, merge_proposals, should_expand, synthesize, ModeratorError,
    SubtopicProposal, SynthesisResult,
};
use crate::persona::{
    generate_claims, preempt, run_debate, Claim, CounterSource, DebateTurn, Debater, EvidencePool, Persona,
    PersonaError, Side, TopicContext,
};
use crate::provider::{CallTag, EndpointConfig, HttpChatProvider, HttpEmbeddingProvider, RetryPolicy};
use crate::retrieval::{Embedder, RetrievalError};
use crate::transcript::{Transcript, TranscriptEntry};
use crate::tree::{DebateTree, NodeStatus, TopicNode, TreeError};

pub use output::{
    write_artifacts, write_compare_manifest, write_failure, CompareEntry, CompareManifest, VariantManifest,
};

pub const DEFAULT_DELTA: usize = 5;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Variant {
    Tod,
    TodNoTree,
    TodNoSd,
    SingleStage,
    TwoStage,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Tod,
        Variant::TodNoTree,
        Variant::TodNoSd,
        Variant::SingleStage,
        Variant::TwoStage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tod => "tod",
            Self::TodNoTree => "tod_no_tree",
            Self::TodNoSd => "tod_no_sd",
            Self::SingleStage => "single_stage",
            Self::TwoStage => "two_stage",
        }
    }

    pub fn builds_tree(self) -> bool {
        matches!(self, Self::Tod | Self::TodNoTree | Self::TodNoSd)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| {
            format!(
                "unknown variant `{s}`; valid variants: {}",
                Self::ALL.map(|v| v.as_str()).join(", ")
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    /// Segments retrieved per query.
    pub delta: usize,
    /// Claims per persona and subtopics per node.
    pub k: usize,
    /// Maximum tree depth.
    pub max_depth: usize,
    pub segment_sentences: usize,
    pub sampling: SamplingTable,
    pub repair_budget: u32,
    pub retry: RetryPolicy,
    /// Sibling debates run in parallel up to this many at once.
    pub concurrency: usize,
    pub max_in_flight: usize,
    /// Recorded only; sampling is not seeded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chat: Option<EndpointConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<EndpointConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Tod,
            delta: DEFAULT_DELTA,
            k: DEFAULT_K,
            max_depth: DEFAULT_MAX_DEPTH,
            segment_sentences: DEFAULT_SEGMENT_SENTENCES,
            sampling: SamplingTable::default(),
            repair_budget: crate::gateway::DEFAULT_REPAIR_BUDGET,
            retry: RetryPolicy::default(),
            concurrency: 1,
            max_in_flight: 4,
            seed_label: None,
            chat: None,
            embeddings: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, value) in [
            ("delta", self.delta),
            ("k", self.k),
            ("max_depth", self.max_depth),
            ("segment_sentences", self.segment_sentences),
            ("concurrency", self.concurrency),
            ("max_in_flight", self.max_in_flight),
        ] {
            if value == 0 {
                return Err(PipelineError::Config(format!("{name} must be at least 1")));
            }
        }
        self.sampling
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    /// Provider or transport exhaustion.
    #[error("{0}")]
    Provider(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn is_provider(&self) -> bool {
        matches!(self, Self::Provider(_))
    }
}

impl From<GatewayError> for PipelineError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Transport { .. } | GatewayError::Content { .. } => Self::Provider(e.to_string()),
            other => Self::Internal(other.to_string()),
        }
    }
}

impl From<PersonaError> for PipelineError {
    fn from(e: PersonaError) -> Self {
        match e {
            PersonaError::Gateway(g) => g.into(),
            PersonaError::Precondition(m) => Self::Internal(m),
        }
    }
}

impl From<ModeratorError> for PipelineError {
    fn from(e: ModeratorError) -> Self {
        match e {
            ModeratorError::Gateway(g) => g.into(),
            ModeratorError::Precondition(m) => Self::Internal(m),
        }
    }
}

impl From<RetrievalError> for PipelineError {
    fn from(e: RetrievalError) -> Self {
        Self::Provider(format!("retrieval failed: {e}"))
    }
}

/// Chat and embedding front ends for one run.
pub struct Providers {
    pub gateway: Gateway,
    pub embedder: Embedder,
}

impl Providers {
    fn gateway_options(config: &RunConfig, record_latency: bool) -> GatewayOptions {
        GatewayOptions {
            sampling: config.sampling.clone(),
            retry: config.retry,
            repair_budget: config.repair_budget,
            max_in_flight: config.max_in_flight,
            record_latency,
        }
    }

    /// HTTP providers from the configured endpoints.
    pub fn http(config: &RunConfig) -> Result<Self, PipelineError> {
        let chat = config
            .chat
            .clone()
            .ok_or_else(|| PipelineError::Config("no chat endpoint configured".into()))?;
        let chat = HttpChatProvider::new(chat).map_err(|e| PipelineError::Config(e.to_string()))?;
        let embeddings = match &config.embeddings {
            Some(e) => e.clone(),
            None if config.variant.builds_tree() && config.variant != Variant::TodNoSd => {
                return Err(PipelineError::Config("no embeddings endpoint configured".into()))
            }
            None => EndpointConfig {
                url: "http://unused.invalid".into(),
                model: "unused".into(),
                api_key: None,
                timeout_secs: 1,
            },
        };
        let embeddings = HttpEmbeddingProvider::new(embeddings).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Self {
            gateway: Gateway::new(Arc::new(chat), Self::gateway_options(config, true)),
            embedder: Embedder::new(Arc::new(embeddings), config.retry),
        })
    }

    /// Scripted providers. Latencies are recorded as zero and retries do not
    /// sleep, so transcripts are byte-stable.
    pub fn mock(config: &RunConfig, script: &MockScript) -> (Self, Arc<ScriptedChat>) {
        let chat = Arc::new(ScriptedChat::from_script(script, Some(config.variant.as_str())));
        let mut options = Self::gateway_options(config, false);
        options.retry = RetryPolicy::immediate(config.retry.max_retries);
        let providers = Self {
            gateway: Gateway::new(chat.clone(), options),
            embedder: Embedder::new(
                Arc::new(script.embedder()),
                RetryPolicy::immediate(config.retry.max_retries),
            ),
        };
        (providers, chat)
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub variant: Variant,
    pub tree: Option<DebateTree>,
    pub summary: String,
    pub synthesis: Option<SynthesisResult>,
    pub transcript: Vec<TranscriptEntry>,
    pub config: RunConfig,
}

impl RunArtifacts {
    pub fn chat_calls(&self) -> usize {
        self.transcript
            .iter()
            .filter(|e| matches!(e, TranscriptEntry::Chat(_)))
            .count()
    }

    pub fn embedding_calls(&self) -> usize {
        self.transcript
            .iter()
            .filter(|e| matches!(e, TranscriptEntry::Embedding { fetched, .. } if *fetched > 0))
            .count()
    }
}

/// Title, abstract and introduction as fixed evidence blocks.
pub fn fixed_context(paper: &crate::corpus::PaperRecord) -> Vec<Segment> {
    [&paper.title, &paper.abstract_text, &paper.introduction]
        .into_iter()
        .map(|t| crate::corpus::normalize_whitespace(t))
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, text)| Segment {
            segment_id: i,
            paper_id: paper.paper_id.clone(),
            sentence_count: split_sentences(&text).len().max(1),
            text,
        })
        .collect()
}

struct Deliberation {
    claims: [Vec<Claim>; 2],
    pools: [EvidencePool; 2],
    proposals: Vec<SubtopicProposal>,
}

struct ChildOutcome {
    turns: Vec<DebateTurn>,
    verdict: crate::gateway::ExpansionVerdict,
    deliberation: Option<Deliberation>,
}

struct Engine<'a> {
    config: &'a RunConfig,
    providers: &'a Providers,
    personas: [Persona; 2],
    segments: [Vec<Segment>; 2],
    fixed: [Vec<Segment>; 2],
}

impl<'a> Engine<'a> {
    fn new(pair: &PairSample, config: &'a RunConfig, providers: &'a Providers) -> Self {
        let personas = [
            Persona::new(pair.paper_a.clone(), Side::Author0),
            Persona::new(pair.paper_b.clone(), Side::Author1),
        ];
        let segments = [
            segment_paper(&pair.paper_a, config.segment_sentences),
            segment_paper(&pair.paper_b, config.segment_sentences),
        ];
        let fixed = [fixed_context(&pair.paper_a), fixed_context(&pair.paper_b)];
        Self {
            config,
            providers,
            personas,
            segments,
            fixed,
        }
    }

    fn retrieval(&self) -> bool {
        self.config.variant != Variant::TodNoSd
    }

    fn evidence(&self, side: Side, topic: &TopicContext<'_>, t: &Transcript) -> Result<Vec<Segment>, PipelineError> {
        let i = side.index();
        if !self.retrieval() {
            return Ok(self.fixed[i].clone());
        }
        let ranked = self
            .providers
            .embedder
            .retrieve(&topic.query(), &self.segments[i], self.config.delta, Some(t))?;
        Ok(ranked.into_iter().map(|r| r.segment).collect())
    }

    /// Retrieval, claims, symmetric preemption, then subtopics.
    fn deliberate(&self, topic: &TopicContext<'_>, t: &Transcript) -> Result<Deliberation, PipelineError> {
        let gw = &self.providers.gateway;
        let mut pools: [EvidencePool; 2] = Default::default();
        let mut claims: [Vec<Claim>; 2] = Default::default();
        for side in Side::BOTH {
            let i = side.index();
            pools[i] = EvidencePool::new(self.evidence(side, topic, t)?);
            claims[i] = generate_claims(&self.personas[i], topic, &pools[i].supporting, self.config.k, gw, t)?;
        }
        for side in Side::BOTH {
            let i = side.index();
            let source = if self.retrieval() {
                CounterSource::Retrieve {
                    embedder: &self.providers.embedder,
                    segments: &self.segments[i],
                    delta: self.config.delta,
                }
            } else {
                CounterSource::Fixed(&self.fixed[i])
            };
            let opposing = claims[side.other().index()].clone();
            preempt(
                &self.personas[i],
                &opposing,
                &source,
                topic.node_id,
                gw,
                t,
                &mut pools[i],
            )?;
        }
        let debater = |side: Side| Debater {
            persona: &self.personas[side.index()],
            claims: &claims[side.index()],
            evidence: &pools[side.index()].supporting,
            opposing_counter: &pools[side.other().index()].counter,
        };
        let mut proposals = generate_subtopics(
            topic,
            &debater(Side::Author0),
            &debater(Side::Author1),
            self.config.k,
            gw,
            t,
        )?;
        if self.config.variant == Variant::TodNoTree && !proposals.is_empty() {
            proposals = vec![merge_proposals(&proposals)];
        }
        Ok(Deliberation {
            claims,
            pools,
            proposals,
        })
    }

    fn debate_child(
        &self,
        parent: &TopicNode,
        child: &TopicNode,
        t: &Transcript,
    ) -> Result<ChildOutcome, PipelineError> {
        let gw = &self.providers.gateway;
        let topic = TopicContext {
            node_id: &child.node_id,
            title: &child.title,
            description: &child.description,
        };
        let relevant = |side: Side| -> Vec<Claim> {
            let ids = child.relevant_claims(side);
            parent
                .claims(side)
                .iter()
                .filter(|c| ids.contains(&c.claim_id))
                .cloned()
                .collect()
        };
        let claims = [relevant(Side::Author0), relevant(Side::Author1)];
        let debater = |side: Side| Debater {
            persona: &self.personas[side.index()],
            claims: &claims[side.index()],
            evidence: &parent.evidence(side).supporting,
            opposing_counter: &parent.evidence(side.other()).counter,
        };
        let turns = run_debate(&debater(Side::Author0), &debater(Side::Author1), &topic, gw, t)?;
        let previous = claims_block(&claims[0], &claims[1]);
        let verdict = judge_expansion(&topic, &turns, &previous, gw, t)?;
        let expand =
            self.config.variant != Variant::TodNoTree && should_expand(&verdict, child.depth, self.config.max_depth);
        t.note(
            Some(&child.node_id),
            format!("expansion gate: {}", if expand { "expand" } else { "stop" }),
        );
        let deliberation = if expand {
            Some(self.deliberate(&topic, t)?)
        } else {
            None
        };
        Ok(ChildOutcome {
            turns,
            verdict,
            deliberation,
        })
    }

    /// Debates the children of `parent_id`, applies the results in child
    /// order, then descends into each expanded child.
    fn grow(&self, tree: &mut DebateTree, parent_id: &str, t: &Transcript) -> Result<(), PipelineError> {
        let children = tree.node(parent_id)?.children.clone();
        if children.is_empty() {
            return Ok(());
        }
        let outcomes = {
            let tree_ref: &DebateTree = tree;
            let parent = tree_ref.node(parent_id)?;
            let mut outcomes = Vec::with_capacity(children.len());
            for batch in children.chunks(self.config.concurrency.max(1)) {
                if batch.len() == 1 {
                    let child = tree_ref.node(&batch[0])?;
                    outcomes.push(self.debate_child(parent, child, t));
                    continue;
                }
                let forks: Vec<Transcript> = batch.iter().map(|_| t.fork()).collect();
                let results: Vec<Result<ChildOutcome, PipelineError>> = std::thread::scope(|s| {
                    let handles: Vec<_> = batch
                        .iter()
                        .zip(&forks)
                        .map(|(id, fork)| {
                            let child = tree_ref.node(id);
                            s.spawn(move || self.debate_child(parent, child?, fork))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| {
                            h.join()
                                .unwrap_or_else(|_| Err(PipelineError::Internal("debate thread panicked".into())))
                        })
                        .collect()
                });
                for fork in &forks {
                    t.absorb(fork);
                }
                outcomes.extend(results);
            }
            outcomes
        };
        for (id, outcome) in children.iter().zip(outcomes) {
            let o = outcome?;
            tree.record_debate(id, o.turns)?;
            tree.record_verdict(id, o.verdict)?;
            match o.deliberation {
                Some(d) => {
                    tree.record_deliberation(id, d.claims, d.pools)?;
                    tree.attach_children(id, &d.proposals)?;
                }
                None => tree.stop(id)?,
            }
        }
        for id in &children {
            if tree.node(id)?.status == NodeStatus::Expanded {
                self.grow(tree, id, t)?;
            }
        }
        Ok(())
    }
}

fn attach_notes(tree: &mut DebateTree, t: &Transcript) {
    for entry in t.entries() {
        if let TranscriptEntry::Note {
            node: Some(node),
            message,
        } = entry
        {
            if tree.nodes.contains_key(&node) && !message.starts_with("expansion gate") {
                let _ = tree.add_note(&node, message);
            }
        }
    }
}

fn check_inputs(pair: &PairSample, config: &RunConfig) -> Result<(), PipelineError> {
    config.validate()?;
    pair.validate().map_err(|e| PipelineError::Input(e.to_string()))
}

fn finish(
    config: &RunConfig,
    tree: Option<DebateTree>,
    summary: String,
    synthesis: Option<SynthesisResult>,
    t: &Transcript,
) -> RunArtifacts {
    RunArtifacts {
        variant: config.variant,
        tree,
        summary,
        synthesis,
        transcript: t.entries(),
        config: config.clone(),
    }
}

/// Shared driver for the three tree-building variants.
fn run_tree_variant(
    pair: &PairSample,
    config: &RunConfig,
    providers: &Providers,
    t: &Transcript,
) -> Result<RunArtifacts, PipelineError> {
    check_inputs(pair, config)?;
    let engine = Engine::new(pair, config, providers);
    let description = pair.topic_description.clone().unwrap_or_default();
    let mut tree = DebateTree::create_root(
        &pair.topic_title,
        &description,
        pair.paper_a.clone(),
        pair.paper_b.clone(),
        config.clone(),
    )?;
    let root_id = tree.root.clone();
    let topic = TopicContext {
        node_id: &root_id,
        title: &pair.topic_title,
        description: &description,
    };
    let d = engine.deliberate(&topic, t)?;
    tree.record_deliberation(&root_id, d.claims, d.pools)?;
    tree.attach_children(&root_id, &d.proposals)?;
    engine.grow(&mut tree, &root_id, t)?;
    attach_notes(&mut tree, t);
    let problems = tree.audit_finished();
    if !problems.is_empty() {
        return Err(PipelineError::Internal(format!(
            "finished tree failed audit: {}",
            problems.join("; ")
        )));
    }
    let synthesis = synthesize(&tree, &providers.gateway, t)?;
    Ok(finish(
        config,
        Some(tree),
        synthesis.summary.clone(),
        Some(synthesis),
        t,
    ))
}

pub fn run_tree_of_debate(
    pair: &PairSample,
    config: &RunConfig,
    providers: &Providers,
    t: &Transcript,
) -> Result<RunArtifacts, PipelineError> {
    expect_variant(config, Variant::Tod)?;
    run_tree_variant(pair, config, providers, t)
}

pub fn run_no_tree(
    pair: &PairSample,
    config: &RunConfig,
    providers: &Providers,
    t: &Transcript,
) -> Result<RunArtifacts, PipelineError> {
    expect_variant(config, Variant::TodNoTree)?;
    run_tree_variant(pair, config, providers, t)
}

pub fn run_no_sd(
    pair: &PairSample,
    config: &RunConfig,
    providers: &Providers,
    t: &Transcript,
) -> Result<RunArtifacts, PipelineError> {
    expect_variant(config, Variant::TodNoSd)?;
    run_tree_variant(pair, config, providers, t)
}

pub fn run_single_stage(
    pair: &PairSample,
    config: &RunConfig,
    providers: &Providers,
    t: &Transcript,
) -> Result<RunArtifacts, PipelineError> {
    expect_variant(config, Variant::SingleStage)?;
    check_inputs(pair, config)?;
    let (a, b) = (&pair.paper_a, &pair.paper_b);
    let prompt = render_prompt(
        TemplateId::BaselineSingleStage,
        &bindings([
            ("topic", pair.topic_title.clone()),
            ("author_0_title", a.title.clone()),
            ("author_0_abstract", a.abstract_text.clone()),
            ("author_0_introduction", a.introduction.clone()),
            ("author_1_title", b.title.clone()),
            ("author_1_abstract", b.abstract_text.clone()),
            ("author_1_introduction", b.introduction.clone()),
        ]),
    )
    .map_err(GatewayError::from)?;
    let summary = providers
        .gateway
        .complete(TemplateId::BaselineSingleStage, prompt, CallTag::default(), t)?;
    Ok(finish(config, None, summary, None, t))
}

pub fn run_two_stage(
    pair: &PairSample,
    config: &RunConfig,
    providers: &Providers,
    t: &Transcript,
) -> Result<RunArtifacts, PipelineError> {
    expect_variant(config, Variant::TwoStage)?;
    check_inputs(pair, config)?;
    let mut summaries = Vec::with_capacity(2);
    for (side, paper) in [(Side::Author0, &pair.paper_a), (Side::Author1, &pair.paper_b)] {
        let prompt = render_prompt(
            TemplateId::BaselinePaperSummary,
            &bindings([
                ("topic", pair.topic_title.clone()),
                ("title", paper.title.clone()),
                ("abstract", paper.abstract_text.clone()),
                ("introduction", paper.introduction.clone()),
            ]),
        )
        .map_err(GatewayError::from)?;
        summaries.push(providers.gateway.complete(
            TemplateId::BaselinePaperSummary,
            prompt,
            CallTag::default().side(side),
            t,
        )?);
    }
    let prompt = render_prompt(
        TemplateId::BaselineContrastive,
        &bindings([
            ("topic", pair.topic_title.clone()),
            ("author_0_title", pair.paper_a.title.clone()),
            ("author_0_summary", summaries[0].clone()),
            ("author_1_title", pair.paper_b.title.clone()),
            ("author_1_summary", summaries[1].clone()),
        ]),
    )
    .map_err(GatewayError::from)?;
    let summary = providers
        .gateway
        .complete(TemplateId::BaselineContrastive, prompt, CallTag::default(), t)?;
    Ok(finish(config, None, summary, None, t))
}

fn expect_variant(config: &RunConfig, variant: Variant) -> Result<(), PipelineError> {
    if config.variant != variant {
        return Err(PipelineError::Config(format!(
            "config selects variant {} but {variant} was requested",
            config.variant
        )));
    }
    Ok(())
}

/// Runs whichever variant `config` selects.
pub fn run(
    pair: &PairSample,
    config: &RunConfig,
    providers: &Providers,
    t: &Transcript,
) -> Result<RunArtifacts, PipelineError> {
    match config.variant {
        Variant::Tod => run_tree_of_debate(pair, config, providers, t),
        Variant::TodNoTree => run_no_tree(pair, config, providers, t),
        Variant::TodNoSd => run_no_sd(pair, config, providers, t),
        Variant::SingleStage => run_single_stage(pair, config, providers, t),
        Variant::TwoStage => run_two_stage(pair, config, providers, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{v}\""));
        }
        assert!("no_tree".parse::<Variant>().unwrap_err().contains("tod_no_tree"));
    }

    #[test]
    fn defaults_and_validation() {
        let c = RunConfig::default();
        assert_eq!((c.delta, c.k, c.max_depth), (5, 3, 3));
        assert!(c.validate().is_ok());
        let bad = RunConfig { k: 0, ..c };
        assert!(bad.validate().unwrap_err().to_string().contains("k must be"));
    }

    #[test]
    fn api_key_never_serialized() {
        let c = RunConfig {
            chat: Some(EndpointConfig {
                url: "http://x".into(),
                model: "m".into(),
                api_key: Some("secret".into()),
                timeout_secs: 5,
            }),
            ..RunConfig::default()
        };
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("secret"));
    }

    #[test]
    fn fixed_context_blocks() {
        let p = crate::corpus::PaperRecord {
            paper_id: "p".into(),
            title: "T".into(),
            abstract_text: "A one. A two.".into(),
            introduction: String::new(),
            body: None,
            source_link: None,
        };
        let blocks = fixed_context(&p);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[1].sentence_count, 2);
    }
}

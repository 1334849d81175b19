//! Paper personas: claim generation, preemption against the opponent's
//! claims, and the present / respond / revise turns of a debate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PaperRecord, Segment};
use crate::gateway::{
    bindings, render_prompt, ArgumentsSchema, Gateway, GatewayError, RelevanceSchema, RelevanceVerdict, TemplateId,
};
use crate::provider::CallTag;
use crate::retrieval::{format_topic_query, Embedder};
use crate::transcript::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "author_0")]
    Author0,
    #[serde(rename = "author_1")]
    Author1,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Author0, Side::Author1];

    pub fn other(self) -> Side {
        match self {
            Side::Author0 => Side::Author1,
            Side::Author1 => Side::Author0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Author0 => 0,
            Side::Author1 => 1,
        }
    }

    /// "Author 0" / "Author 1", as the prompts refer to the sides.
    pub fn label(self) -> &'static str {
        match self {
            Side::Author0 => "Author 0",
            Side::Author1 => "Author 1",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Author0 => "author_0",
            Side::Author1 => "author_1",
        })
    }
}

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl PersonaError {
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Gateway(e) if e.is_transport())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub paper: PaperRecord,
    pub side: Side,
}

impl Persona {
    pub fn new(paper: PaperRecord, side: Side) -> Self {
        Self { paper, side }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub claim_id: usize,
    pub title: String,
    pub description: String,
    /// Indexes into the persona's supporting pool at the node.
    pub evidence_ids: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidencePool {
    pub supporting: Vec<Segment>,
    /// Opposing claim id to own-paper segments kept against it.
    pub counter: BTreeMap<usize, Vec<Segment>>,
    pub unaddressed: BTreeSet<usize>,
}

impl EvidencePool {
    pub fn new(supporting: Vec<Segment>) -> Self {
        Self {
            supporting,
            ..Self::default()
        }
    }

    /// Stores the kept segments for one opposing claim, keeping
    /// `unaddressed` in sync.
    pub fn set_counter(&mut self, claim_id: usize, kept: Vec<Segment>) {
        if kept.is_empty() {
            self.unaddressed.insert(claim_id);
        } else {
            self.unaddressed.remove(&claim_id);
        }
        self.counter.insert(claim_id, kept);
    }

    pub fn is_consistent(&self) -> bool {
        self.counter
            .iter()
            .all(|(id, kept)| kept.is_empty() == self.unaddressed.contains(id))
            && self.unaddressed.iter().all(|id| self.counter.contains_key(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Present,
    Respond,
    Revise,
}

impl Stage {
    /// (speaker, stage) for the six turns of a node, in order.
    pub const SEQUENCE: [(Side, Stage); 6] = [
        (Side::Author0, Stage::Present),
        (Side::Author1, Stage::Present),
        (Side::Author0, Stage::Respond),
        (Side::Author1, Stage::Respond),
        (Side::Author0, Stage::Revise),
        (Side::Author1, Stage::Revise),
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateTurn {
    pub speaker: Side,
    pub stage: Stage,
    pub text: String,
}

/// The topic a persona is working on.
#[derive(Debug, Clone, Copy)]
pub struct TopicContext<'a> {
    pub node_id: &'a str,
    pub title: &'a str,
    pub description: &'a str,
}

impl TopicContext<'_> {
    pub fn query(&self) -> String {
        format_topic_query(self.title, Some(self.description))
    }
}

/// Numbered evidence list as it appears in the claim-generation prompt.
pub fn evidence_block(segments: &[Segment]) -> String {
    segments
        .iter()
        .enumerate()
        .map(|(i, s)| format!("\n\nEvidence #{i}: {}", s.text))
        .collect()
}

fn joined(segments: &[Segment]) -> String {
    if segments.is_empty() {
        "None".to_string()
    } else {
        segments.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

/// Text of the segments a claim cites.
pub fn cited_evidence(claim: &Claim, pool: &[Segment]) -> String {
    let cited: Vec<Segment> = claim
        .evidence_ids
        .iter()
        .filter_map(|&i| pool.get(i).cloned())
        .collect();
    joined(&cited)
}

/// Generates 1..=k claims from `segments`. An empty segment list, a refused
/// request or an unusable structured reply leaves the persona claimless for
/// the node; only transport failures are returned as errors.
pub fn generate_claims(
    persona: &Persona,
    topic: &TopicContext<'_>,
    segments: &[Segment],
    k: usize,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<Vec<Claim>, PersonaError> {
    if segments.is_empty() {
        transcript.note(
            Some(topic.node_id),
            format!("{} has no evidence segments; no claims generated", persona.side),
        );
        return Ok(Vec::new());
    }
    let prompt = render_prompt(
        TemplateId::PersonaGenerateArguments,
        &bindings([
            ("title", persona.paper.title.clone()),
            ("abstract", persona.paper.abstract_text.clone()),
            ("topic", topic.query()),
            ("evidence", evidence_block(segments)),
            ("k", k.to_string()),
        ]),
    )
    .map_err(GatewayError::from)?;
    let schema = ArgumentsSchema {
        k,
        evidence_len: segments.len(),
    };
    let tag = CallTag::default().node(topic.node_id).side(persona.side);
    match gateway.complete_structured(prompt, &schema, tag, transcript) {
        Ok(reply) => Ok(reply
            .parsed
            .into_iter()
            .enumerate()
            .map(|(claim_id, d)| Claim {
                claim_id,
                title: d.title,
                description: d.description,
                evidence_ids: d.evidence,
            })
            .collect()),
        Err(e) if e.is_transport() => Err(e.into()),
        Err(e) => {
            transcript.note(
                Some(topic.node_id),
                format!("{} enters the debate without claims: {e}", persona.side),
            );
            Ok(Vec::new())
        }
    }
}

/// Classifies one segment against one claim. An unusable reply counts as
/// irrelevant.
pub fn classify_relevance(
    segment: &Segment,
    claim: &Claim,
    tag: CallTag,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<RelevanceVerdict, PersonaError> {
    let prompt = render_prompt(
        TemplateId::PersonaRelevance,
        &bindings([
            ("claim", claim.title.clone()),
            ("claim_description", claim.description.clone()),
            ("evidence", segment.text.clone()),
        ]),
    )
    .map_err(GatewayError::from)?;
    let node = tag.node.clone();
    match gateway.complete_structured(prompt, &RelevanceSchema, tag, transcript) {
        Ok(reply) => Ok(reply.parsed),
        Err(e) if e.is_transport() => Err(e.into()),
        Err(e) => {
            transcript.note(
                node.as_deref(),
                format!(
                    "segment {} treated as irrelevant to claim {}: {e}",
                    segment.segment_id, claim.claim_id
                ),
            );
            Ok(RelevanceVerdict {
                supports: false,
                refutes: false,
                clarifies: false,
                irrelevant: true,
            })
        }
    }
}

/// Where preemption draws candidate counter-evidence from.
pub enum CounterSource<'a> {
    /// Top-δ retrieval over the persona's own segments.
    Retrieve {
        embedder: &'a Embedder,
        segments: &'a [Segment],
        delta: usize,
    },
    /// A fixed list, used when retrieval is disabled.
    Fixed(&'a [Segment]),
}

/// Keeps the candidates whose verdict passes [`RelevanceVerdict::keeps`].
pub fn filter_counter_evidence(candidates: &[Segment], verdicts: &[RelevanceVerdict]) -> Vec<Segment> {
    candidates
        .iter()
        .zip(verdicts)
        .filter(|(_, v)| v.keeps())
        .map(|(s, _)| s.clone())
        .collect()
}

/// For each opposing claim, gathers own-paper segments that bear on it.
/// A retrieval failure for one claim leaves that claim unaddressed and the
/// others proceed; chat transport failures abort.
pub fn preempt(
    persona: &Persona,
    opposing_claims: &[Claim],
    source: &CounterSource<'_>,
    node_id: &str,
    gateway: &Gateway,
    transcript: &Transcript,
    pool: &mut EvidencePool,
) -> Result<(), PersonaError> {
    for claim in opposing_claims {
        let candidates: Vec<Segment> = match source {
            CounterSource::Retrieve {
                embedder,
                segments,
                delta,
            } => {
                let query = format_topic_query(&claim.title, Some(&claim.description));
                match embedder.retrieve(&query, segments, *delta, Some(transcript)) {
                    Ok(ranked) => ranked.into_iter().map(|r| r.segment).collect(),
                    Err(e) => {
                        transcript.note(
                            Some(node_id),
                            format!(
                                "{} could not retrieve against claim {}: {e}",
                                persona.side, claim.claim_id
                            ),
                        );
                        Vec::new()
                    }
                }
            }
            CounterSource::Fixed(blocks) => blocks.to_vec(),
        };
        let mut verdicts = Vec::with_capacity(candidates.len());
        for segment in &candidates {
            let tag = CallTag::default().node(node_id).side(persona.side);
            verdicts.push(classify_relevance(segment, claim, tag, gateway, transcript)?);
        }
        pool.set_counter(claim.claim_id, filter_counter_evidence(&candidates, &verdicts));
    }
    Ok(())
}

/// One side's material for a debate node.
#[derive(Debug, Clone, Copy)]
pub struct Debater<'a> {
    pub persona: &'a Persona,
    pub claims: &'a [Claim],
    /// The pool the claims' evidence ids index.
    pub evidence: &'a [Segment],
    /// The opponent's counter-evidence, keyed by this side's claim ids.
    pub opposing_counter: &'a BTreeMap<usize, Vec<Segment>>,
}

/// The "claimed contributions" block of the debate prompts.
pub fn contributions_block(debater: &Debater<'_>) -> String {
    let me = debater.persona.side.label();
    let them = debater.persona.side.other().label();
    debater
        .claims
        .iter()
        .map(|c| {
            let counter = debater.opposing_counter.get(&c.claim_id).map(Vec::as_slice).unwrap_or(&[]);
            format!(
                "{me} Paper's Contributions #{id}: {title}: {desc}\n{me} Paper's Contribution Evidence #{id}: {evidence}\n{them}'s relevant evidence to potentially counter the quality of this contribution: {counter}",
                id = c.claim_id,
                title = c.title,
                desc = c.description,
                evidence = cited_evidence(c, debater.evidence),
                counter = joined(counter),
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Turns rendered as the conversation history block.
pub fn history_block(turns: &[DebateTurn]) -> String {
    turns
        .iter()
        .map(|t| format!("{}: {}", t.speaker.label(), t.text.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn turn_bindings(
    me: &Debater<'_>,
    opponent: &Persona,
    topic: &TopicContext<'_>,
    history: Option<&[DebateTurn]>,
) -> crate::gateway::Bindings {
    let mut b = bindings([
        ("title", me.persona.paper.title.clone()),
        ("abstract", me.persona.paper.abstract_text.clone()),
        ("opposition_title", opponent.paper.title.clone()),
        ("opposition_abstract", opponent.paper.abstract_text.clone()),
        ("topic", topic.title.to_string()),
        ("topic_description", topic.description.to_string()),
        ("contributions", contributions_block(me)),
    ]);
    if let Some(h) = history {
        b.insert("conversation_history".into(), history_block(h));
    }
    b
}

fn take_turn(
    stage: Stage,
    me: &Debater<'_>,
    opponent: &Persona,
    topic: &TopicContext<'_>,
    history: Option<&[DebateTurn]>,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<DebateTurn, PersonaError> {
    let template = match stage {
        Stage::Present => TemplateId::PersonaPresent,
        Stage::Respond => TemplateId::PersonaRespond,
        Stage::Revise => TemplateId::PersonaRevise,
    };
    let prompt = render_prompt(template, &turn_bindings(me, opponent, topic, history)).map_err(GatewayError::from)?;
    let tag = CallTag::default().node(topic.node_id).side(me.persona.side);
    let text = gateway.complete(template, prompt, tag, transcript)?;
    Ok(DebateTurn {
        speaker: me.persona.side,
        stage,
        text,
    })
}

pub fn present_argument(
    me: &Debater<'_>,
    opponent: &Persona,
    topic: &TopicContext<'_>,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<DebateTurn, PersonaError> {
    take_turn(Stage::Present, me, opponent, topic, None, gateway, transcript)
}

/// Requires the opponent's present turn in `history`.
pub fn respond_to(
    me: &Debater<'_>,
    opponent: &Persona,
    topic: &TopicContext<'_>,
    history: &[DebateTurn],
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<DebateTurn, PersonaError> {
    let opp = opponent.side;
    if !history.iter().any(|t| t.speaker == opp && t.stage == Stage::Present) {
        return Err(PersonaError::Precondition(format!(
            "{} cannot respond: no present turn from {opp} in the history",
            me.persona.side
        )));
    }
    take_turn(Stage::Respond, me, opponent, topic, Some(history), gateway, transcript)
}

/// Requires both respond turns in `history`.
pub fn revise_argument(
    me: &Debater<'_>,
    opponent: &Persona,
    topic: &TopicContext<'_>,
    history: &[DebateTurn],
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<DebateTurn, PersonaError> {
    for side in Side::BOTH {
        if !history.iter().any(|t| t.speaker == side && t.stage == Stage::Respond) {
            return Err(PersonaError::Precondition(format!(
                "{} cannot revise: no respond turn from {side} in the history",
                me.persona.side
            )));
        }
    }
    take_turn(Stage::Revise, me, opponent, topic, Some(history), gateway, transcript)
}

/// Runs the six turns in canonical order.
pub fn run_debate(
    a: &Debater<'_>,
    b: &Debater<'_>,
    topic: &TopicContext<'_>,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<Vec<DebateTurn>, PersonaError> {
    let mut turns = Vec::with_capacity(6);
    for (side, stage) in Stage::SEQUENCE {
        let (me, opp) = match side {
            Side::Author0 => (a, b),
            Side::Author1 => (b, a),
        };
        let turn = match stage {
            Stage::Present => present_argument(me, opp.persona, topic, gateway, transcript)?,
            Stage::Respond => respond_to(me, opp.persona, topic, &turns, gateway, transcript)?,
            Stage::Revise => revise_argument(me, opp.persona, topic, &turns, gateway, transcript)?,
        };
        turns.push(turn);
    }
    Ok(turns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::gateway::GatewayOptions;
    use crate::mock::ScriptedChat;
    use crate::provider::RetryPolicy;

    fn paper(id: &str, title: &str) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            title: title.into(),
            abstract_text: format!("{title} abstract"),
            introduction: String::new(),
            body: None,
            source_link: None,
        }
    }

    fn seg(id: usize, text: &str) -> Segment {
        Segment {
            segment_id: id,
            paper_id: "p".into(),
            text: text.into(),
            sentence_count: 1,
        }
    }

    fn gateway(chat: Arc<ScriptedChat>) -> Gateway {
        Gateway::new(
            chat,
            GatewayOptions {
                retry: RetryPolicy::immediate(0),
                record_latency: false,
                ..GatewayOptions::default()
            },
        )
    }

    const TOPIC: TopicContext<'static> = TopicContext {
        node_id: "0",
        title: "t",
        description: "d",
    };

    #[test]
    fn side_serde_and_display() {
        assert_eq!(serde_json::to_string(&Side::Author1).unwrap(), "\"author_1\"");
        assert_eq!(Side::Author0.to_string(), "author_0");
        assert_eq!(Side::Author0.other(), Side::Author1);
    }

    #[test]
    fn claims_take_reply_order_ids() {
        let chat = Arc::new(ScriptedChat::from_pairs([(
            "persona_generate_arguments",
            r#"{"arguments": [
                {"argument_title": "A", "description": "a", "evidence": [1, 2]},
                {"argument_title": "B", "description": "b", "evidence": [0]}]}"#,
        )]));
        let gw = gateway(chat.clone());
        let t = Transcript::new();
        let persona = Persona::new(paper("p", "P"), Side::Author0);
        let segs: Vec<Segment> = (0..5).map(|i| seg(i, "x")).collect();
        let claims = generate_claims(&persona, &TOPIC, &segs, 3, &gw, &t).unwrap();
        assert_eq!(claims.len(), 2);
        assert_eq!(claims[0].evidence_ids, [1, 2]);
        assert_eq!(claims[1].claim_id, 1);
        assert_eq!(chat.requests()[0].temperature, 0.3);
    }

    #[test]
    fn no_segments_no_call() {
        let chat = Arc::new(ScriptedChat::from_pairs([]));
        let gw = gateway(chat.clone());
        let t = Transcript::new();
        let persona = Persona::new(paper("p", "P"), Side::Author0);
        assert!(generate_claims(&persona, &TOPIC, &[], 3, &gw, &t).unwrap().is_empty());
        assert_eq!(chat.calls(), 0);
    }

    #[test]
    fn exhausted_repairs_degrade_to_no_claims() {
        let chat = Arc::new(ScriptedChat::from_pairs([
            ("persona_generate_arguments", "nope"),
            ("persona_generate_arguments", "nope"),
            ("persona_generate_arguments", "nope"),
        ]));
        let gw = gateway(chat);
        let t = Transcript::new();
        let persona = Persona::new(paper("p", "P"), Side::Author1);
        let claims = generate_claims(&persona, &TOPIC, &[seg(0, "x")], 3, &gw, &t).unwrap();
        assert!(claims.is_empty());
        assert_eq!(t.notes().len(), 1);
    }

    #[test]
    fn pool_invariant() {
        let mut pool = EvidencePool::default();
        pool.set_counter(0, vec![]);
        pool.set_counter(1, vec![seg(0, "x")]);
        assert!(pool.unaddressed.contains(&0));
        assert!(!pool.unaddressed.contains(&1));
        pool.set_counter(0, vec![seg(1, "y")]);
        assert!(pool.unaddressed.is_empty());
        assert!(pool.is_consistent());
    }

    #[test]
    fn respond_needs_history() {
        let chat = Arc::new(ScriptedChat::from_pairs([]));
        let gw = gateway(chat);
        let t = Transcript::new();
        let a = Persona::new(paper("a", "A"), Side::Author0);
        let b = Persona::new(paper("b", "B"), Side::Author1);
        let counter = BTreeMap::new();
        let me = Debater {
            persona: &a,
            claims: &[],
            evidence: &[],
            opposing_counter: &counter,
        };
        let err = respond_to(&me, &b, &TOPIC, &[], &gw, &t).unwrap_err();
        assert!(matches!(err, PersonaError::Precondition(_)));
    }

    #[test]
    fn six_turns_in_order() {
        let chat = Arc::new(ScriptedChat::from_pairs([
            ("persona_present", "a0"),
            ("persona_present", "b0"),
            ("persona_respond", "a1"),
            ("persona_respond", "b1"),
            ("persona_revise", "a2"),
            ("persona_revise", "b2"),
        ]));
        let gw = gateway(chat.clone());
        let t = Transcript::new();
        let pa = Persona::new(paper("a", "A"), Side::Author0);
        let pb = Persona::new(paper("b", "B"), Side::Author1);
        let counter = BTreeMap::new();
        let claims = [Claim {
            claim_id: 0,
            title: "c".into(),
            description: "cd".into(),
            evidence_ids: vec![0],
        }];
        let ev = [seg(0, "ev")];
        let a = Debater {
            persona: &pa,
            claims: &claims,
            evidence: &ev,
            opposing_counter: &counter,
        };
        let b = Debater {
            persona: &pb,
            claims: &[],
            evidence: &[],
            opposing_counter: &counter,
        };
        let turns = run_debate(&a, &b, &TOPIC, &gw, &t).unwrap();
        let seq: Vec<(Side, Stage)> = turns.iter().map(|t| (t.speaker, t.stage)).collect();
        assert_eq!(seq, Stage::SEQUENCE);
        let reqs = chat.requests();
        let temps: Vec<f64> = reqs.iter().map(|r| r.temperature).collect();
        assert_eq!(temps, [0.1, 0.1, 0.4, 0.4, 0.4, 0.4]);
        assert!(reqs[0].prompt.contains("Author 0 Paper's Contributions #0: c: cd"));
        assert!(reqs[0]
            .prompt
            .contains("potentially counter the quality of this contribution: None"));
        assert!(reqs[3].prompt.contains("Author 0: a0\n\nAuthor 1: b0\n\nAuthor 0: a1"));
    }
}

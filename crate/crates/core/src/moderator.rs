//! The moderator: proposes subtopics, judges debated nodes, and synthesizes
//! the finished tree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    bindings, render_prompt, ExpansionSchema, ExpansionVerdict, Gateway, GatewayError, SubtopicsSchema, TemplateId,
};
use crate::persona::{cited_evidence, Claim, DebateTurn, Debater, Side, Stage, TopicContext};
use crate::provider::CallTag;
use crate::transcript::Transcript;
use crate::tree::{DebateTree, NodeStatus};

#[derive(Debug, Error)]
pub enum ModeratorError {
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl ModeratorError {
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Gateway(e) if e.is_transport())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtopicProposal {
    pub title: String,
    pub description: String,
    pub relevant_claims_a: Vec<usize>,
    pub relevant_claims_b: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub summary: String,
    pub node_count: usize,
    pub max_depth_reached: usize,
}

/// One paper with its claims, as the subtopic prompt lists it.
pub fn paper_block(side: &Debater<'_>) -> String {
    let me = side.persona.side.label();
    let them = side.persona.side.other().label();
    let paper = &side.persona.paper;
    let mut out = format!(
        "{me} Paper's Title: {}\n{me} Paper's Abstract: {}",
        paper.title, paper.abstract_text
    );
    if side.claims.is_empty() {
        out.push_str(&format!("\n{me} Paper's Contributions: None"));
    }
    for c in side.claims {
        let counter = side
            .opposing_counter
            .get(&c.claim_id)
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" "))
            .unwrap_or_else(|| "None".into());
        out.push_str(&format!(
            "\n{me} Paper's Contribution #{id}: {title}: {desc}\n{me} Paper's Contribution #{id} Evidence: {evidence}\n{them}'s Counter-Evidence to Contribution #{id}: {counter}",
            id = c.claim_id,
            title = c.title,
            desc = c.description,
            evidence = cited_evidence(c, side.evidence),
        ));
    }
    out
}

/// Checks one drafted subtopic against the two claim sets.
pub fn validate_proposal(p: &SubtopicProposal, claims_a: &[Claim], claims_b: &[Claim]) -> Result<(), String> {
    if p.relevant_claims_a.is_empty() && p.relevant_claims_b.is_empty() {
        return Err("cites no contributions from either author".into());
    }
    for (ids, claims, side) in [
        (&p.relevant_claims_a, claims_a, Side::Author0),
        (&p.relevant_claims_b, claims_b, Side::Author1),
    ] {
        if let Some(bad) = ids.iter().find(|id| !claims.iter().any(|c| c.claim_id == **id)) {
            return Err(format!("cites {side} contribution #{bad}, which does not exist"));
        }
    }
    Ok(())
}

/// Up to `k` subtopics; invalid drafts are dropped with a note. An empty
/// result means the parent becomes a leaf.
pub fn generate_subtopics(
    topic: &TopicContext<'_>,
    a: &Debater<'_>,
    b: &Debater<'_>,
    k: usize,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<Vec<SubtopicProposal>, ModeratorError> {
    if a.claims.is_empty() && b.claims.is_empty() {
        transcript.note(Some(topic.node_id), "no viable subtopics: neither author has claims");
        return Ok(Vec::new());
    }
    let prompt = render_prompt(
        TemplateId::ModGenerateTopics,
        &bindings([
            ("topic", topic.title.to_string()),
            ("topic_description", topic.description.to_string()),
            ("author_0_paper", paper_block(a)),
            ("author_1_paper", paper_block(b)),
            ("k", k.to_string()),
        ]),
    )
    .map_err(GatewayError::from)?;
    let drafts = match gateway.complete_structured(
        prompt,
        &SubtopicsSchema { k },
        CallTag::default().node(topic.node_id),
        transcript,
    ) {
        Ok(reply) => reply.parsed,
        Err(e) if e.is_transport() => return Err(e.into()),
        Err(e) => {
            transcript.note(Some(topic.node_id), format!("no viable subtopics: {e}"));
            return Ok(Vec::new());
        }
    };
    let mut kept = Vec::new();
    for (i, d) in drafts.into_iter().enumerate() {
        let p = SubtopicProposal {
            title: d.title,
            description: d.description,
            relevant_claims_a: d.author_0_contributions,
            relevant_claims_b: d.author_1_contributions,
        };
        match validate_proposal(&p, a.claims, b.claims) {
            Ok(()) => kept.push(p),
            Err(why) => transcript.note(
                Some(topic.node_id),
                format!("dropped subtopic {i} \"{}\": {why}", p.title),
            ),
        }
    }
    if kept.is_empty() {
        transcript.note(Some(topic.node_id), "no viable subtopics");
    }
    Ok(kept)
}

/// Every no-tree child is one merged subtopic; each block is tagged.
pub fn merge_proposals(proposals: &[SubtopicProposal]) -> SubtopicProposal {
    let title = proposals
        .iter()
        .enumerate()
        .map(|(i, p)| format!("<topic_{}>{}</topic_{}>", i + 1, p.title, i + 1))
        .collect::<Vec<_>>()
        .join(" ");
    let description = proposals
        .iter()
        .enumerate()
        .map(|(i, p)| format!("<topic_{n}>{}: {}</topic_{n}>", p.title, p.description, n = i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let union = |pick: fn(&SubtopicProposal) -> &Vec<usize>| {
        let mut ids: Vec<usize> = proposals.iter().flat_map(|p| pick(p).iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    SubtopicProposal {
        title,
        description,
        relevant_claims_a: union(|p| &p.relevant_claims_a),
        relevant_claims_b: union(|p| &p.relevant_claims_b),
    }
}

/// Claims entering a node, as the judge's "previous arguments".
pub fn claims_block(claims_a: &[Claim], claims_b: &[Claim]) -> String {
    let mut lines = Vec::new();
    for (side, claims) in [(Side::Author0, claims_a), (Side::Author1, claims_b)] {
        if claims.is_empty() {
            lines.push(format!("{}: no claimed contributions", side.label()));
        }
        for c in claims {
            lines.push(format!("{}: {}: {}", side.label(), c.title, c.description));
        }
    }
    lines.join("\n")
}

fn revised(turns: &[DebateTurn], side: Side) -> Option<&str> {
    turns
        .iter()
        .find(|t| t.speaker == side && t.stage == Stage::Revise)
        .map(|t| t.text.as_str())
}

/// The two revise turns, as the judge's "current arguments".
pub fn revised_block(turns: &[DebateTurn]) -> String {
    Side::BOTH
        .iter()
        .map(|&s| format!("{}: {}", s.label(), revised(turns, s).unwrap_or("").trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// The verdict used when judgment fails: forces the path to stop.
pub fn default_stop_verdict(reason: &str) -> ExpansionVerdict {
    ExpansionVerdict {
        explanation: format!("No usable judgment; the path stops here. {reason}"),
        progression_of_arguments: false,
        meaningful_questions: false,
        clear_winner: true,
        degraded: true,
    }
}

pub fn judge_expansion(
    topic: &TopicContext<'_>,
    turns: &[DebateTurn],
    previous_arguments: &str,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<ExpansionVerdict, ModeratorError> {
    let order: Vec<(Side, Stage)> = turns.iter().map(|t| (t.speaker, t.stage)).collect();
    if order != Stage::SEQUENCE {
        return Err(ModeratorError::Precondition(format!(
            "node {} is not fully debated ({} of 6 turns)",
            topic.node_id,
            turns.len()
        )));
    }
    let prompt = render_prompt(
        TemplateId::ModIsExpand,
        &bindings([
            ("topic", topic.title.to_string()),
            ("topic_description", topic.description.to_string()),
            ("conversation_history", crate::persona::history_block(turns)),
            ("previous_arguments", previous_arguments.to_string()),
            ("current_arguments", revised_block(turns)),
        ]),
    )
    .map_err(GatewayError::from)?;
    match gateway.complete_structured(
        prompt,
        &ExpansionSchema,
        CallTag::default().node(topic.node_id),
        transcript,
    ) {
        Ok(reply) if reply.parsed.explanation.trim().is_empty() => {
            transcript.note(Some(topic.node_id), "judgment degraded: empty explanation");
            Ok(default_stop_verdict("The judgment had an empty explanation."))
        }
        Ok(reply) => Ok(reply.parsed),
        Err(e) if e.is_transport() => Err(e.into()),
        Err(e) => {
            transcript.note(Some(topic.node_id), format!("judgment degraded: {e}"));
            Ok(default_stop_verdict(""))
        }
    }
}

/// The expansion gate.
pub fn should_expand(verdict: &ExpansionVerdict, depth: usize, max_depth: usize) -> bool {
    depth < max_depth && (verdict.progression_of_arguments || verdict.meaningful_questions || !verdict.clear_winner)
}

fn indent(text: &str, pad: &str) -> String {
    text.lines().map(|l| format!("{pad}{l}")).collect::<Vec<_>>().join("\n")
}

/// Debated nodes in preorder, each as title/description plus both revised
/// arguments, indented by depth.
pub fn synthesis_tree_block(tree: &DebateTree) -> String {
    tree.preorder()
        .into_iter()
        .filter(|n| n.depth >= 1 && n.turns.len() == 6)
        .map(|n| {
            let pad = "  ".repeat(n.depth - 1);
            let block = format!(
                "\"{}\" : \"{}\"\nAuthor 0's argument: {}\nAuthor 1's argument: {}",
                n.title,
                n.description,
                n.revised_argument_a.as_deref().unwrap_or("").trim_end(),
                n.revised_argument_b.as_deref().unwrap_or("").trim_end(),
            );
            indent(&block, &pad)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn synthesis_prompt(tree: &DebateTree) -> Result<String, GatewayError> {
    Ok(render_prompt(
        TemplateId::ModSummarize,
        &bindings([
            ("topic", tree.root_node().title.clone()),
            ("author_0_title", tree.paper_a.title.clone()),
            ("author_1_title", tree.paper_b.title.clone()),
            ("tree", synthesis_tree_block(tree)),
        ]),
    )?)
}

/// Summarizes a finished tree.
pub fn synthesize(
    tree: &DebateTree,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<SynthesisResult, ModeratorError> {
    if let Some(n) = tree
        .preorder()
        .into_iter()
        .find(|n| !matches!(n.status, NodeStatus::Expanded | NodeStatus::Leaf))
    {
        return Err(ModeratorError::Precondition(format!(
            "node {} is still {}; synthesis needs a finished tree",
            n.node_id, n.status
        )));
    }
    let prompt = synthesis_prompt(tree)?;
    let summary = gateway.complete(
        TemplateId::ModSummarize,
        prompt,
        CallTag::default().node(tree.root.clone()),
        transcript,
    )?;
    Ok(SynthesisResult {
        summary,
        node_count: tree.len(),
        max_depth_reached: tree.max_depth(),
    })
}

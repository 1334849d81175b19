//! The debate tree: node lifecycle, audit, canonical JSON document, and a
//! plain-text render.
//!
//! Node ids are path strings: the root is `0`, its children `0.1`, `0.2`, and
//! so on. The root deliberates and spawns children but is never debated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PaperRecord;
use crate::gateway::ExpansionVerdict;
use crate::moderator::SubtopicProposal;
use crate::persona::{Claim, DebateTurn, EvidencePool, Side, Stage};
use crate::pipeline::RunConfig;

pub const TREE_FORMAT: &str = "debatetree";
pub const TREE_VERSION: u32 = 1;
pub const ROOT_ID: &str = "0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Created,
    Deliberated,
    Debated,
    Judged,
    Expanded,
    Leaf,
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Created => "created",
            Self::Deliberated => "deliberated",
            Self::Debated => "debated",
            Self::Judged => "judged",
            Self::Expanded => "expanded",
            Self::Leaf => "leaf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeEvent {
    DeliberationComplete,
    DebateComplete,
    VerdictRecorded,
    Expand,
    Stop,
}

impl fmt::Display for NodeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DeliberationComplete => "deliberation-complete",
            Self::DebateComplete => "debate-complete",
            Self::VerdictRecorded => "verdict-recorded",
            Self::Expand => "expand",
            Self::Stop => "stop",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("invalid tree input: {0}")]
    Validation(String),
    #[error("node {node}: cannot apply {event} in status {status}")]
    IllegalTransition {
        node: String,
        status: NodeStatus,
        event: NodeEvent,
    },
    #[error("node {node}: {reason}")]
    State { node: String, reason: String },
    #[error("node {node} is at depth {depth}; children would exceed the maximum depth {max_depth}")]
    DepthOverflow {
        node: String,
        depth: usize,
        max_depth: usize,
    },
    #[error("node {node} already has children")]
    DuplicateAttach { node: String },
    #[error("no node `{given}`; valid choices: {}", valid.join(", "))]
    UnknownNode { given: String, valid: Vec<String> },
    #[error("tree document: {message} at `{path}`")]
    Parse { path: String, message: String },
    #[error("tree document: unsupported format `{format}` version {version} (expected `{TREE_FORMAT}` version {TREE_VERSION})")]
    UnsupportedVersion { format: String, version: u64 },
    #[error("tree document: cycle through node {node}")]
    Cycle { node: String },
    #[error("tree document: {0}")]
    Structure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicNode {
    pub node_id: String,
    pub title: String,
    pub description: String,
    pub depth: usize,
    pub parent: Option<String>,
    pub children: Vec<String>,
    pub status: NodeStatus,
    /// Ids of the parent's claims this node's debate draws on.
    pub relevant_claims_a: Vec<usize>,
    pub relevant_claims_b: Vec<usize>,
    /// Output of this node's own self-deliberation, if it had one.
    pub claims_a: Vec<Claim>,
    pub claims_b: Vec<Claim>,
    pub evidence_a: EvidencePool,
    pub evidence_b: EvidencePool,
    pub turns: Vec<DebateTurn>,
    pub revised_argument_a: Option<String>,
    pub revised_argument_b: Option<String>,
    pub verdict: Option<ExpansionVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TopicNode {
    fn new(node_id: String, title: String, description: String, depth: usize, parent: Option<String>) -> Self {
        Self {
            node_id,
            title,
            description,
            depth,
            parent,
            children: Vec::new(),
            status: NodeStatus::Created,
            relevant_claims_a: Vec::new(),
            relevant_claims_b: Vec::new(),
            claims_a: Vec::new(),
            claims_b: Vec::new(),
            evidence_a: EvidencePool::default(),
            evidence_b: EvidencePool::default(),
            turns: Vec::new(),
            revised_argument_a: None,
            revised_argument_b: None,
            verdict: None,
            notes: Vec::new(),
        }
    }

    pub fn claims(&self, side: Side) -> &[Claim] {
        match side {
            Side::Author0 => &self.claims_a,
            Side::Author1 => &self.claims_b,
        }
    }

    pub fn evidence(&self, side: Side) -> &EvidencePool {
        match side {
            Side::Author0 => &self.evidence_a,
            Side::Author1 => &self.evidence_b,
        }
    }

    pub fn relevant_claims(&self, side: Side) -> &[usize] {
        match side {
            Side::Author0 => &self.relevant_claims_a,
            Side::Author1 => &self.relevant_claims_b,
        }
    }

    pub fn revised_argument(&self, side: Side) -> Option<&str> {
        match side {
            Side::Author0 => self.revised_argument_a.as_deref(),
            Side::Author1 => self.revised_argument_b.as_deref(),
        }
    }

    fn has_canonical_turns(&self) -> bool {
        self.turns.iter().map(|t| (t.speaker, t.stage)).eq(Stage::SEQUENCE)
    }
}

/// Maximum node count for `k` children per node and depth `l`.
pub fn node_bound(k: usize, max_depth: usize) -> usize {
    let mut total = 0usize;
    let mut level = 1usize;
    for _ in 0..=max_depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(k);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebateTree {
    pub root: String,
    pub nodes: BTreeMap<String, TopicNode>,
    pub paper_a: PaperRecord,
    pub paper_b: PaperRecord,
    pub config: RunConfig,
}

/// Field order here fixes the document layout.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDocument {
    format: String,
    version: u32,
    root: String,
    paper_a: PaperRecord,
    paper_b: PaperRecord,
    config: RunConfig,
    /// Preorder.
    nodes: Vec<TopicNode>,
}

impl DebateTree {
    pub fn create_root(
        topic_title: &str,
        topic_description: &str,
        paper_a: PaperRecord,
        paper_b: PaperRecord,
        config: RunConfig,
    ) -> Result<Self, TreeError> {
        if topic_title.trim().is_empty() {
            return Err(TreeError::Validation("root topic title is empty".into()));
        }
        let root = TopicNode::new(
            ROOT_ID.into(),
            topic_title.to_string(),
            topic_description.to_string(),
            0,
            None,
        );
        Ok(Self {
            root: ROOT_ID.into(),
            nodes: BTreeMap::from([(ROOT_ID.to_string(), root)]),
            paper_a,
            paper_b,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.values().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn root_node(&self) -> &TopicNode {
        &self.nodes[&self.root]
    }

    pub fn node(&self, id: &str) -> Result<&TopicNode, TreeError> {
        self.nodes.get(id).ok_or_else(|| self.unknown(id))
    }

    fn node_mut(&mut self, id: &str) -> Result<&mut TopicNode, TreeError> {
        if !self.nodes.contains_key(id) {
            return Err(self.unknown(id));
        }
        Ok(self.nodes.get_mut(id).expect("checked"))
    }

    /// Error for a missing id, listing the children of its nearest existing
    /// ancestor.
    fn unknown(&self, id: &str) -> TreeError {
        let mut prefix = id;
        let valid = loop {
            match prefix.rfind('.') {
                Some(dot) => {
                    prefix = &prefix[..dot];
                    if let Some(n) = self.nodes.get(prefix) {
                        break n.children.clone();
                    }
                }
                None => break vec![self.root.clone()],
            }
        };
        TreeError::UnknownNode {
            given: id.to_string(),
            valid,
        }
    }

    /// Nodes in depth-first preorder, children in attachment order.
    pub fn preorder(&self) -> Vec<&TopicNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root.as_str()];
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            let Some(node) = self.nodes.get(id) else { continue };
            if !seen.insert(id) {
                continue;
            }
            out.push(node);
            stack.extend(node.children.iter().rev().map(String::as_str));
        }
        out
    }

    /// Applies one lifecycle event after checking that the node holds what
    /// the target status requires.
    pub fn advance_status(&mut self, id: &str, event: NodeEvent) -> Result<&TopicNode, TreeError> {
        use NodeEvent as E;
        use NodeStatus as S;
        let node = self.node(id)?;
        let illegal = || TreeError::IllegalTransition {
            node: id.to_string(),
            status: node.status,
            event,
        };
        let state = |reason: &str| TreeError::State {
            node: id.to_string(),
            reason: reason.to_string(),
        };
        let next = match (node.status, event) {
            (S::Created, E::DeliberationComplete) if node.depth == 0 => S::Deliberated,
            (S::Created, E::DebateComplete) if node.depth >= 1 => {
                if !node.has_canonical_turns() {
                    return Err(state("a debated node needs exactly six turns in canonical order"));
                }
                if node.revised_argument_a.is_none() || node.revised_argument_b.is_none() {
                    return Err(state("a debated node needs both revised arguments"));
                }
                S::Debated
            }
            (S::Debated, E::VerdictRecorded) => {
                if node.verdict.is_none() {
                    return Err(state("no verdict recorded"));
                }
                S::Judged
            }
            (S::Deliberated | S::Judged, E::Expand) => {
                if node.children.is_empty() {
                    return Err(state("expanding requires at least one child"));
                }
                S::Expanded
            }
            (S::Deliberated | S::Judged, E::Stop) => {
                if !node.children.is_empty() {
                    return Err(state("a node with children cannot become a leaf"));
                }
                S::Leaf
            }
            _ => return Err(illegal()),
        };
        let node = self.node_mut(id)?;
        node.status = next;
        Ok(node)
    }

    /// Stores self-deliberation output. The root advances to deliberated; a
    /// judged node keeps its status until children are attached.
    pub fn record_deliberation(
        &mut self,
        id: &str,
        claims: [Vec<Claim>; 2],
        evidence: [EvidencePool; 2],
    ) -> Result<(), TreeError> {
        let node = self.node(id)?;
        let event = NodeEvent::DeliberationComplete;
        match (node.status, node.depth) {
            (NodeStatus::Created, 0) | (NodeStatus::Judged, _) => {}
            (status, _) => {
                return Err(TreeError::IllegalTransition {
                    node: id.to_string(),
                    status,
                    event,
                })
            }
        }
        let root = node.depth == 0;
        let node = self.node_mut(id)?;
        let [ca, cb] = claims;
        let [ea, eb] = evidence;
        node.claims_a = ca;
        node.claims_b = cb;
        node.evidence_a = ea;
        node.evidence_b = eb;
        if root {
            self.advance_status(id, event)?;
        }
        Ok(())
    }

    /// Stores the six turns and advances to debated.
    pub fn record_debate(&mut self, id: &str, turns: Vec<DebateTurn>) -> Result<(), TreeError> {
        let node = self.node(id)?;
        if node.status != NodeStatus::Created || node.depth == 0 {
            return Err(TreeError::IllegalTransition {
                node: id.to_string(),
                status: node.status,
                event: NodeEvent::DebateComplete,
            });
        }
        let revise = |side: Side| {
            turns
                .iter()
                .find(|t| t.speaker == side && t.stage == Stage::Revise)
                .map(|t| t.text.clone())
        };
        let (a, b) = (revise(Side::Author0), revise(Side::Author1));
        let saved = self.nodes.get(id).cloned().expect("exists");
        let node = self.node_mut(id)?;
        node.revised_argument_a = a;
        node.revised_argument_b = b;
        node.turns = turns;
        if let Err(e) = self.advance_status(id, NodeEvent::DebateComplete) {
            self.nodes.insert(id.to_string(), saved);
            return Err(e);
        }
        Ok(())
    }

    pub fn record_verdict(&mut self, id: &str, verdict: ExpansionVerdict) -> Result<(), TreeError> {
        let node = self.node(id)?;
        if node.status != NodeStatus::Debated {
            return Err(TreeError::IllegalTransition {
                node: id.to_string(),
                status: node.status,
                event: NodeEvent::VerdictRecorded,
            });
        }
        self.node_mut(id)?.verdict = Some(verdict);
        self.advance_status(id, NodeEvent::VerdictRecorded)?;
        Ok(())
    }

    /// One child per proposal, in order. An empty list makes the parent a
    /// leaf.
    pub fn attach_children(
        &mut self,
        parent_id: &str,
        proposals: &[SubtopicProposal],
    ) -> Result<Vec<String>, TreeError> {
        let parent = self.node(parent_id)?;
        if !parent.children.is_empty() {
            return Err(TreeError::DuplicateAttach {
                node: parent_id.to_string(),
            });
        }
        if !matches!(parent.status, NodeStatus::Deliberated | NodeStatus::Judged) {
            return Err(TreeError::IllegalTransition {
                node: parent_id.to_string(),
                status: parent.status,
                event: NodeEvent::Expand,
            });
        }
        if proposals.is_empty() {
            self.advance_status(parent_id, NodeEvent::Stop)?;
            return Ok(Vec::new());
        }
        if parent.depth + 1 > self.config.max_depth {
            return Err(TreeError::DepthOverflow {
                node: parent_id.to_string(),
                depth: parent.depth,
                max_depth: self.config.max_depth,
            });
        }
        if proposals.len() > self.config.k {
            return Err(TreeError::State {
                node: parent_id.to_string(),
                reason: format!("{} subtopics exceed k = {}", proposals.len(), self.config.k),
            });
        }
        let depth = parent.depth + 1;
        let mut ids = Vec::with_capacity(proposals.len());
        for (i, p) in proposals.iter().enumerate() {
            let id = format!("{parent_id}.{}", i + 1);
            let mut child = TopicNode::new(
                id.clone(),
                p.title.clone(),
                p.description.clone(),
                depth,
                Some(parent_id.to_string()),
            );
            child.relevant_claims_a = p.relevant_claims_a.clone();
            child.relevant_claims_b = p.relevant_claims_b.clone();
            self.nodes.insert(id.clone(), child);
            ids.push(id);
        }
        self.node_mut(parent_id)?.children = ids.clone();
        self.advance_status(parent_id, NodeEvent::Expand)?;
        Ok(ids)
    }

    pub fn stop(&mut self, id: &str) -> Result<(), TreeError> {
        self.advance_status(id, NodeEvent::Stop).map(|_| ())
    }

    pub fn add_note(&mut self, id: &str, note: impl Into<String>) -> Result<(), TreeError> {
        self.node_mut(id)?.notes.push(note.into());
        Ok(())
    }

    /// Structural invariants that hold at every point of construction.
    pub fn audit(&self) -> Vec<String> {
        let mut v = Vec::new();
        let k = self.config.k;
        let max_depth = self.config.max_depth;
        let Some(root) = self.nodes.get(&self.root) else {
            return vec![format!("root {} is missing", self.root)];
        };
        if root.depth != 0 || root.parent.is_some() {
            v.push("root must have depth 0 and no parent".into());
        }
        if !root.turns.is_empty() {
            v.push("root holds debate turns".into());
        }
        let reached = self.preorder();
        if reached.len() != self.nodes.len() {
            v.push(format!(
                "{} of {} nodes are reachable from the root",
                reached.len(),
                self.nodes.len()
            ));
        }
        if self.nodes.len() > node_bound(k, max_depth) {
            v.push(format!(
                "{} nodes exceed the bound for k={k}, l={max_depth}",
                self.nodes.len()
            ));
        }
        for (key, n) in &self.nodes {
            let id = &n.node_id;
            if key != id {
                v.push(format!("node stored under {key} has id {id}"));
            }
            if n.depth > max_depth {
                v.push(format!("{id}: depth {} exceeds {max_depth}", n.depth));
            }
            if n.children.len() > k {
                v.push(format!("{id}: {} children exceed k = {k}", n.children.len()));
            }
            if !n.children.is_empty() && n.status != NodeStatus::Expanded {
                v.push(format!("{id}: has children but status {}", n.status));
            }
            if n.status == NodeStatus::Expanded && n.children.is_empty() {
                v.push(format!("{id}: expanded without children"));
            }
            for (i, c) in n.children.iter().enumerate() {
                if *c != format!("{id}.{}", i + 1) {
                    v.push(format!("{id}: child {i} has id {c}"));
                }
                match self.nodes.get(c) {
                    None => v.push(format!("{id}: child {c} is missing")),
                    Some(child) => {
                        if child.parent.as_deref() != Some(id.as_str()) {
                            v.push(format!("{c}: parent link does not point to {id}"));
                        }
                        if child.depth != n.depth + 1 {
                            v.push(format!("{c}: depth {} under parent depth {}", child.depth, n.depth));
                        }
                        for side in Side::BOTH {
                            if let Some(bad) = child
                                .relevant_claims(side)
                                .iter()
                                .find(|cid| !n.claims(side).iter().any(|cl| cl.claim_id == **cid))
                            {
                                v.push(format!("{c}: cites missing {side} claim {bad} of {id}"));
                            }
                        }
                    }
                }
            }
            if n.depth >= 1 {
                let debated = !matches!(n.status, NodeStatus::Created);
                if debated {
                    if !n.has_canonical_turns() {
                        v.push(format!("{id}: status {} without six canonical turns", n.status));
                    }
                    for side in Side::BOTH {
                        let expected = n
                            .turns
                            .iter()
                            .find(|t| t.speaker == side && t.stage == Stage::Revise)
                            .map(|t| t.text.as_str());
                        if n.revised_argument(side).is_none() || n.revised_argument(side) != expected {
                            v.push(format!("{id}: {side} revised argument does not match its revise turn"));
                        }
                    }
                } else if !n.turns.is_empty() {
                    v.push(format!("{id}: created node holds turns"));
                }
                let judged = matches!(n.status, NodeStatus::Judged | NodeStatus::Expanded | NodeStatus::Leaf);
                if judged != n.verdict.is_some() {
                    v.push(format!("{id}: verdict presence does not match status {}", n.status));
                }
                if matches!(n.status, NodeStatus::Deliberated) {
                    v.push(format!("{id}: only the root is deliberated"));
                }
            } else if matches!(n.status, NodeStatus::Debated | NodeStatus::Judged) || n.verdict.is_some() {
                v.push(format!("{id}: the root is never debated or judged"));
            }
            for side in Side::BOTH {
                let pool = n.evidence(side);
                if !pool.is_consistent() {
                    v.push(format!(
                        "{id}: {side} unaddressed set disagrees with its counter-evidence"
                    ));
                }
                for c in n.claims(side) {
                    if c.evidence_ids.is_empty() || c.evidence_ids.iter().any(|e| *e >= pool.supporting.len()) {
                        v.push(format!(
                            "{id}: {side} claim {} cites evidence outside its pool",
                            c.claim_id
                        ));
                    }
                }
            }
        }
        v
    }

    /// [`audit`](Self::audit) plus the conditions of a finished tree.
    pub fn audit_finished(&self) -> Vec<String> {
        let mut v = self.audit();
        for n in self.nodes.values() {
            match (n.children.is_empty(), n.status) {
                (true, NodeStatus::Leaf) | (false, NodeStatus::Expanded) => {}
                (true, s) => v.push(format!("{}: childless node has status {s}, expected leaf", n.node_id)),
                (false, s) => v.push(format!(
                    "{}: internal node has status {s}, expected expanded",
                    n.node_id
                )),
            }
        }
        v
    }

    /// Canonical JSON document with a trailing newline.
    pub fn to_json(&self) -> String {
        let doc = TreeDocument {
            format: TREE_FORMAT.into(),
            version: TREE_VERSION,
            root: self.root.clone(),
            paper_a: self.paper_a.clone(),
            paper_b: self.paper_b.clone(),
            config: self.config.clone(),
            nodes: self.preorder().into_iter().cloned().collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| TreeError::Parse {
            path: ".".into(),
            message: e.to_string(),
        })?;
        let format = value.get("format").and_then(|f| f.as_str()).unwrap_or("").to_string();
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if format != TREE_FORMAT || version != TREE_VERSION as u64 {
            return Err(TreeError::UnsupportedVersion { format, version });
        }
        let doc: TreeDocument = serde_path_to_error::deserialize(value).map_err(|e| TreeError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let mut nodes = BTreeMap::new();
        for n in doc.nodes {
            let id = n.node_id.clone();
            if nodes.insert(id.clone(), n).is_some() {
                return Err(TreeError::Structure(format!("duplicate node id {id}")));
            }
        }
        if !nodes.contains_key(&doc.root) {
            return Err(TreeError::Structure(format!(
                "root {} is not among the nodes",
                doc.root
            )));
        }
        detect_cycle(&doc.root, &nodes)?;
        let tree = Self {
            root: doc.root,
            nodes,
            paper_a: doc.paper_a,
            paper_b: doc.paper_b,
            config: doc.config,
        };
        let problems = tree.audit();
        if let Some(first) = problems.first() {
            return Err(TreeError::Structure(first.clone()));
        }
        Ok(tree)
    }

    /// The whole tree, or one node with `only`.
    pub fn render(&self, only: Option<&str>) -> Result<String, TreeError> {
        match only {
            Some(id) => Ok(render_node(self.node(id)?, false)),
            None => Ok(self
                .preorder()
                .into_iter()
                .map(|n| render_node(n, true))
                .collect::<Vec<_>>()
                .join("\n")),
        }
    }
}

fn detect_cycle(root: &str, nodes: &BTreeMap<String, TopicNode>) -> Result<(), TreeError> {
    fn visit<'a>(
        id: &'a str,
        nodes: &'a BTreeMap<String, TopicNode>,
        path: &mut Vec<&'a str>,
        done: &mut BTreeSet<&'a str>,
    ) -> Result<(), TreeError> {
        if path.contains(&id) {
            return Err(TreeError::Cycle { node: id.to_string() });
        }
        if !done.insert(id) {
            return Err(TreeError::Structure(format!("node {id} has more than one parent")));
        }
        let Some(node) = nodes.get(id) else {
            return Err(TreeError::Structure(format!("child {id} is missing")));
        };
        path.push(id);
        for c in &node.children {
            visit(c, nodes, path, done)?;
        }
        path.pop();
        Ok(())
    }
    visit(root, nodes, &mut Vec::new(), &mut BTreeSet::new())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn render_node(n: &TopicNode, indented: bool) -> String {
    let pad = if indented {
        "    ".repeat(n.depth)
    } else {
        String::new()
    };
    let mut lines = Vec::new();
    let heading = if n.depth == 0 {
        "Root Topic".to_string()
    } else {
        format!("Level {} Child Argument", n.depth)
    };
    lines.push(format!("({}) {heading}: {}", n.node_id, n.title));
    if !n.description.is_empty() {
        lines.push(n.description.clone());
    }
    if n.depth >= 1 {
        for side in Side::BOTH {
            let text = n.revised_argument(side).unwrap_or("(not debated)");
            lines.push(format!("{}'s Argument: {}", side.label(), text.trim_end()));
        }
        match &n.verdict {
            Some(v) => lines.push(format!(
                "Verdict: progression_of_arguments={}, meaningful_questions={}, clear_winner={}{}",
                yes_no(v.progression_of_arguments),
                yes_no(v.meaningful_questions),
                yes_no(v.clear_winner),
                if v.degraded { " (degraded)" } else { "" }
            )),
            None => lines.push("Verdict: none".into()),
        }
    }
    lines.push(format!("Status: {}", n.status));
    let mut out = String::new();
    for line in lines.iter().flat_map(|l| l.lines()) {
        out.push_str(&pad);
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper(id: &str) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            title: format!("{id} title"),
            abstract_text: "abs".into(),
            introduction: "intro".into(),
            body: None,
            source_link: None,
        }
    }

    fn tree() -> DebateTree {
        DebateTree::create_root("topic", "", paper("a"), paper("b"), RunConfig::default()).unwrap()
    }

    fn proposal(title: &str) -> SubtopicProposal {
        SubtopicProposal {
            title: title.into(),
            description: "d".into(),
            relevant_claims_a: vec![],
            relevant_claims_b: vec![],
        }
    }

    fn turns() -> Vec<DebateTurn> {
        Stage::SEQUENCE
            .iter()
            .map(|(s, st)| DebateTurn {
                speaker: *s,
                stage: *st,
                text: format!("{s} {st:?}"),
            })
            .collect()
    }

    fn stop_verdict() -> ExpansionVerdict {
        ExpansionVerdict {
            explanation: "done".into(),
            progression_of_arguments: false,
            meaningful_questions: false,
            clear_winner: true,
            degraded: false,
        }
    }

    #[test]
    fn root_defaults() {
        let t = tree();
        assert_eq!(t.len(), 1);
        assert_eq!(t.root_node().depth, 0);
        assert_eq!(t.config.max_depth, 3);
        assert!(DebateTree::create_root(" ", "", paper("a"), paper("b"), RunConfig::default()).is_err());
    }

    #[test]
    fn lifecycle_and_ids() {
        let mut t = tree();
        t.record_deliberation("0", [vec![], vec![]], Default::default())
            .unwrap();
        let ids = t
            .attach_children("0", &[proposal("x"), proposal("y"), proposal("z")])
            .unwrap();
        assert_eq!(ids, ["0.1", "0.2", "0.3"]);
        assert!(matches!(
            t.attach_children("0", &[proposal("w")]),
            Err(TreeError::DuplicateAttach { .. })
        ));
        for id in &ids {
            t.record_debate(id, turns()).unwrap();
            t.record_verdict(id, stop_verdict()).unwrap();
            t.stop(id).unwrap();
        }
        assert!(t.audit_finished().is_empty(), "{:?}", t.audit_finished());
        assert_eq!(
            t.node("0.2").unwrap().revised_argument_a.as_deref(),
            Some("author_0 Revise")
        );
    }

    #[test]
    fn illegal_transitions_name_status_and_event() {
        let mut t = tree();
        let err = t.advance_status("0", NodeEvent::VerdictRecorded).unwrap_err();
        assert_eq!(
            err.to_string(),
            "node 0: cannot apply verdict-recorded in status created"
        );
        assert_eq!(t.root_node().status, NodeStatus::Created);
    }

    #[test]
    fn depth_overflow() {
        let config = RunConfig {
            max_depth: 1,
            ..RunConfig::default()
        };
        let mut t = DebateTree::create_root("t", "", paper("a"), paper("b"), config).unwrap();
        t.record_deliberation("0", [vec![], vec![]], Default::default())
            .unwrap();
        t.attach_children("0", &[proposal("x")]).unwrap();
        t.record_debate("0.1", turns()).unwrap();
        t.record_verdict("0.1", stop_verdict()).unwrap();
        assert!(matches!(
            t.attach_children("0.1", &[proposal("y")]),
            Err(TreeError::DepthOverflow { .. })
        ));
    }

    #[test]
    fn empty_proposals_make_a_leaf() {
        let mut t = tree();
        t.record_deliberation("0", [vec![], vec![]], Default::default())
            .unwrap();
        assert!(t.attach_children("0", &[]).unwrap().is_empty());
        assert_eq!(t.root_node().status, NodeStatus::Leaf);
    }

    #[test]
    fn bad_turn_order_is_rejected() {
        let mut t = tree();
        t.record_deliberation("0", [vec![], vec![]], Default::default())
            .unwrap();
        t.attach_children("0", &[proposal("x")]).unwrap();
        let mut bad = turns();
        bad.swap(0, 1);
        assert!(t.record_debate("0.1", bad).is_err());
        assert_eq!(t.node("0.1").unwrap().status, NodeStatus::Created);
        assert!(t.node("0.1").unwrap().turns.is_empty());
    }

    #[test]
    fn unknown_node_lists_siblings() {
        let mut t = tree();
        t.record_deliberation("0", [vec![], vec![]], Default::default())
            .unwrap();
        t.attach_children("0", &[proposal("x"), proposal("y")]).unwrap();
        let err = t.node("0.7").unwrap_err();
        assert_eq!(err.to_string(), "no node `0.7`; valid choices: 0.1, 0.2");
    }

    #[test]
    fn bound() {
        assert_eq!(node_bound(3, 3), 40);
        assert_eq!(node_bound(1, 2), 3);
    }
}

//! Prompt template registry. Bodies live in `templates/*.txt` and use
//! `{{name}}` placeholders; every placeholder must be bound at render time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("template `{template}`: placeholder `{placeholder}` is not bound")]
    Unbound { template: TemplateId, placeholder: String },
    #[error("unknown template id `{given}`; valid ids: {}", valid.join(", "))]
    UnknownTemplate { given: String, valid: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ModGenerateTopics,
    ModIsExpand,
    ModSummarize,
    PersonaGenerateArguments,
    PersonaRelevance,
    PersonaPresent,
    PersonaRespond,
    PersonaRevise,
    BaselineSingleStage,
    BaselinePaperSummary,
    BaselineContrastive,
}

impl TemplateId {
    /// The eight debate templates.
    pub const DEBATE: [TemplateId; 8] = [
        TemplateId::ModGenerateTopics,
        TemplateId::ModIsExpand,
        TemplateId::ModSummarize,
        TemplateId::PersonaGenerateArguments,
        TemplateId::PersonaRelevance,
        TemplateId::PersonaPresent,
        TemplateId::PersonaRespond,
        TemplateId::PersonaRevise,
    ];

    /// Prompts used only by the single- and two-stage baselines.
    pub const BASELINE: [TemplateId; 3] = [
        TemplateId::BaselineSingleStage,
        TemplateId::BaselinePaperSummary,
        TemplateId::BaselineContrastive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ModGenerateTopics => "mod_generate_topics",
            Self::ModIsExpand => "mod_is_expand",
            Self::ModSummarize => "mod_summarize",
            Self::PersonaGenerateArguments => "persona_generate_arguments",
            Self::PersonaRelevance => "persona_relevance",
            Self::PersonaPresent => "persona_present",
            Self::PersonaRespond => "persona_respond",
            Self::PersonaRevise => "persona_revise",
            Self::BaselineSingleStage => "baseline_single_stage",
            Self::BaselinePaperSummary => "baseline_paper_summary",
            Self::BaselineContrastive => "baseline_contrastive",
        }
    }

    pub fn body(self) -> &'static str {
        match self {
            Self::ModGenerateTopics => include_str!("../../templates/mod_generate_topics.txt"),
            Self::ModIsExpand => include_str!("../../templates/mod_is_expand.txt"),
            Self::ModSummarize => include_str!("../../templates/mod_summarize.txt"),
            Self::PersonaGenerateArguments => {
                include_str!("../../templates/persona_generate_arguments.txt")
            }
            Self::PersonaRelevance => include_str!("../../templates/persona_relevance.txt"),
            Self::PersonaPresent => include_str!("../../templates/persona_present.txt"),
            Self::PersonaRespond => include_str!("../../templates/persona_respond.txt"),
            Self::PersonaRevise => include_str!("../../templates/persona_revise.txt"),
            Self::BaselineSingleStage => include_str!("../../templates/baseline_single_stage.txt"),
            Self::BaselinePaperSummary => include_str!("../../templates/baseline_paper_summary.txt"),
            Self::BaselineContrastive => include_str!("../../templates/baseline_contrastive.txt"),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        placeholder_spans(self.body())
            .into_iter()
            .filter(|&(_, _, name)| seen.insert(name.to_string()))
            .map(|(_, _, name)| name.to_string())
            .collect()
    }

    /// Parses one of the eight debate template ids.
    pub fn parse_debate(s: &str) -> Result<Self, RenderError> {
        Self::DEBATE
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| RenderError::UnknownTemplate {
                given: s.to_string(),
                valid: Self::DEBATE.iter().map(|t| t.as_str().to_string()).collect(),
            })
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = RenderError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::DEBATE
            .into_iter()
            .chain(Self::BASELINE)
            .find(|t| t.as_str() == s)
            .ok_or_else(|| RenderError::UnknownTemplate {
                given: s.to_string(),
                valid: Self::DEBATE
                    .iter()
                    .chain(&Self::BASELINE)
                    .map(|t| t.as_str().to_string())
                    .collect(),
            })
    }
}

/// (start, end, name) for every `{{name}}` where name is `[a-z0-9_]+`.
fn placeholder_spans(body: &str) -> Vec<(usize, usize, &str)> {
    let mut spans = Vec::new();
    let mut pos = 0;
    while let Some(open) = body[pos..].find("{{") {
        let start = pos + open;
        let Some(close) = body[start + 2..].find("}}") else {
            break;
        };
        let name = &body[start + 2..start + 2 + close];
        if !name.is_empty()
            && name
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        {
            let end = start + 2 + close + 2;
            spans.push((start, end, name));
            pos = end;
        } else {
            pos = start + 2;
        }
    }
    spans
}

pub type Bindings = BTreeMap<String, String>;

/// Substitutes every placeholder. Bound values are inserted verbatim and are
/// never re-scanned for placeholders.
pub fn render_prompt(template: TemplateId, bindings: &Bindings) -> Result<String, RenderError> {
    let body = template.body();
    let mut out = String::with_capacity(body.len() * 2);
    let mut last = 0;
    for (start, end, name) in placeholder_spans(body) {
        let value = bindings.get(name).ok_or_else(|| RenderError::Unbound {
            template,
            placeholder: name.to_string(),
        })?;
        out.push_str(&body[last..start]);
        out.push_str(value);
        last = end;
    }
    out.push_str(&body[last..]);
    Ok(out)
}

/// Binding keys the template does not use.
pub fn unused_bindings(template: TemplateId, bindings: &Bindings) -> Vec<String> {
    let used: BTreeSet<String> = template.placeholders().into_iter().collect();
    bindings.keys().filter(|k| !used.contains(*k)).cloned().collect()
}

/// Convenience for building bindings inline.
pub fn bindings<const N: usize>(pairs: [(&str, String); N]) -> Bindings {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

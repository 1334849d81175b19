//! Extraction and validation of the JSON objects the structured prompts ask for.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::TemplateId;

/// Pulls the JSON value out of a model reply: the first fenced block if
/// there is one, otherwise the outermost `{...}` or `[...]` span.
pub fn extract_json(reply: &str) -> Result<Value, String> {
    let candidate = fenced_block(reply)
        .or_else(|| bracketed_span(reply))
        .ok_or_else(|| "reply contains no JSON object".to_string())?;
    match serde_json::from_str(candidate) {
        Ok(v) => Ok(v),
        Err(first) => serde_json::from_str(&pythonic_literals_to_json(candidate))
            .map_err(|_| format!("reply is not valid JSON: {first}")),
    }
}

fn fenced_block(reply: &str) -> Option<&str> {
    let start = reply.find("```")?;
    let after = &reply[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim())
}

fn bracketed_span(reply: &str) -> Option<&str> {
    let open = reply.find(['{', '['])?;
    let close_char = if reply[open..].starts_with('{') { '}' } else { ']' };
    let close = reply.rfind(close_char)?;
    (close > open).then(|| &reply[open..=close])
}

/// Rewrites bare `True`/`False`/`None` outside string literals.
fn pythonic_literals_to_json(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        let replaced = [("True", "true"), ("False", "false"), ("None", "null")]
            .into_iter()
            .find(|(py, _)| rest.starts_with(py));
        if let Some((py, js)) = replaced {
            out.push_str(js);
            rest = &rest[py.len()..];
        } else {
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}

/// A structured output contract for one template.
pub trait Schema {
    type Output;
    fn template(&self) -> TemplateId;
    fn parse(&self, value: &Value) -> Result<Self::Output, String>;
}

fn object<'a>(value: &'a Value, what: &str) -> Result<&'a Map<String, Value>, String> {
    value.as_object().ok_or_else(|| format!("{what} must be a JSON object"))
}

fn text_field(obj: &Map<String, Value>, key: &str, what: &str) -> Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::String(_)) => Err(format!("{what}: \"{key}\" is empty")),
        Some(_) => Err(format!("{what}: \"{key}\" must be a string")),
        None => Err(format!("{what}: missing \"{key}\"")),
    }
}

fn flag(value: &Value) -> Option<bool> {
    match value {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn flag_field(obj: &Map<String, Value>, key: &str) -> Result<bool, String> {
    let v = obj.get(key).ok_or_else(|| format!("missing \"{key}\""))?;
    flag(v).ok_or_else(|| format!("\"{key}\" must be True/False or Yes/No, found {v}"))
}

fn id_list(obj: &Map<String, Value>, key: &str, what: &str) -> Result<Vec<usize>, String> {
    let list = match obj.get(key) {
        Some(Value::Array(items)) => items,
        Some(Value::Null) | None => return Err(format!("{what}: missing \"{key}\" list")),
        Some(_) => return Err(format!("{what}: \"{key}\" must be a list of integers")),
    };
    let mut ids = Vec::with_capacity(list.len());
    for item in list {
        let id = match item {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.trim().trim_start_matches('#').parse::<u64>().ok(),
            _ => None,
        }
        .ok_or_else(|| format!("{what}: \"{key}\" entry {item} is not a non-negative integer"))?;
        let id = id as usize;
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    Ok(ids)
}

/// Accepts `{"<key>": [...]}` or a bare list.
fn item_list<'a>(value: &'a Value, key: &str) -> Result<&'a Vec<Value>, String> {
    match value {
        Value::Array(items) => Ok(items),
        Value::Object(obj) => obj
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| format!("missing \"{key}\" list")),
        _ => Err(format!("expected an object with a \"{key}\" list")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentDraft {
    pub title: String,
    pub description: String,
    pub evidence: Vec<usize>,
}

/// 1..=k arguments, each citing at least one in-range evidence index.
#[derive(Debug, Clone, Copy)]
pub struct ArgumentsSchema {
    pub k: usize,
    pub evidence_len: usize,
}

impl Schema for ArgumentsSchema {
    type Output = Vec<ArgumentDraft>;

    fn template(&self) -> TemplateId {
        TemplateId::PersonaGenerateArguments
    }

    fn parse(&self, value: &Value) -> Result<Self::Output, String> {
        let items = item_list(value, "arguments")?;
        if items.is_empty() || items.len() > self.k {
            return Err(format!("expected 1 to {} arguments, found {}", self.k, items.len()));
        }
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let what = format!("argument {i}");
                let obj = object(item, &what)?;
                let evidence = id_list(obj, "evidence", &what)?;
                if evidence.is_empty() {
                    return Err(format!("{what}: \"evidence\" must cite at least one item"));
                }
                if let Some(bad) = evidence.iter().find(|&&e| e >= self.evidence_len) {
                    return Err(format!(
                        "{what}: evidence id {bad} is out of range (the evidence list has {} items, ids 0 to {})",
                        self.evidence_len,
                        self.evidence_len.saturating_sub(1)
                    ));
                }
                Ok(ArgumentDraft {
                    title: text_field(obj, "argument_title", &what)?,
                    description: text_field(obj, "description", &what)?,
                    evidence,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtopicDraft {
    pub title: String,
    pub description: String,
    pub author_0_contributions: Vec<usize>,
    pub author_1_contributions: Vec<usize>,
}

/// 1..=k subtopic objects. Claim-id existence is checked by the moderator,
/// which drops bad proposals individually instead of re-prompting.
#[derive(Debug, Clone, Copy)]
pub struct SubtopicsSchema {
    pub k: usize,
}

impl Schema for SubtopicsSchema {
    type Output = Vec<SubtopicDraft>;

    fn template(&self) -> TemplateId {
        TemplateId::ModGenerateTopics
    }

    fn parse(&self, value: &Value) -> Result<Self::Output, String> {
        let items = item_list(value, "subtopics")?;
        if items.is_empty() || items.len() > self.k {
            return Err(format!("expected 1 to {} subtopics, found {}", self.k, items.len()));
        }
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let what = format!("subtopic {i}");
                let obj = object(item, &what)?;
                Ok(SubtopicDraft {
                    title: text_field(obj, "topic_title", &what)?,
                    description: text_field(obj, "topic_description", &what)?,
                    author_0_contributions: id_list(obj, "author_0_relevant_contributions", &what)?,
                    author_1_contributions: id_list(obj, "author_1_relevant_contributions", &what)?,
                })
            })
            .collect()
    }
}

/// The four relevance answers for one (segment, claim) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub supports: bool,
    pub refutes: bool,
    pub clarifies: bool,
    pub irrelevant: bool,
}

impl RelevanceVerdict {
    /// Counter-evidence is kept when it bears on the claim in some way and
    /// was not also marked irrelevant.
    pub fn keeps(&self) -> bool {
        (self.supports || self.refutes || self.clarifies) && !self.irrelevant
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RelevanceSchema;

impl Schema for RelevanceSchema {
    type Output = RelevanceVerdict;

    fn template(&self) -> TemplateId {
        TemplateId::PersonaRelevance
    }

    fn parse(&self, value: &Value) -> Result<Self::Output, String> {
        let obj = object(value, "relevance verdict")?;
        Ok(RelevanceVerdict {
            supports: flag_field(obj, "supports_claim")?,
            refutes: flag_field(obj, "refutes_claim")?,
            clarifies: flag_field(obj, "clarifies_claim")?,
            irrelevant: flag_field(obj, "irrelevant_to_claim")?,
        })
    }
}

/// The moderator's judgment of one debated node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionVerdict {
    pub explanation: String,
    pub progression_of_arguments: bool,
    pub meaningful_questions: bool,
    pub clear_winner: bool,
    /// Set when the verdict is the stop default used after a failed judgment.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ExpansionSchema;

impl Schema for ExpansionSchema {
    type Output = ExpansionVerdict;

    fn template(&self) -> TemplateId {
        TemplateId::ModIsExpand
    }

    fn parse(&self, value: &Value) -> Result<Self::Output, String> {
        let obj = object(value, "expansion verdict")?;
        Ok(ExpansionVerdict {
            explanation: text_field(obj, "explanation", "expansion verdict")?,
            progression_of_arguments: flag_field(obj, "progression_of_arguments")?,
            meaningful_questions: flag_field(obj, "meaningful_questions")?,
            clear_winner: flag_field(obj, "clear_winner")?,
            degraded: false,
        })
    }
}

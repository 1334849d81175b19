//! Rule-based sentence splitting and fixed-size sentence grouping.

use serde::{Deserialize, Serialize};

use super::PaperRecord;

/// Tokens that end in a period but do not end a sentence. Compared
/// case-insensitively against the word immediately before the period.
const ABBREVIATIONS: &[&str] = &[
    "al", "fig", "figs", "eq", "eqs", "e.g", "i.e", "cf", "vs", "etc", "sec", "tab", "no", "dr", "mr", "mrs", "ms",
    "prof", "approx", "ref", "refs", "resp", "viz", "st", "jr", "sr", "ch", "vol", "pp", "alg", "thm", "def", "lem",
    "prop", "appx", "eqn",
];

/// A contiguous run of sentences from one paper, the unit of retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: usize,
    pub paper_id: String,
    pub text: String,
    pub sentence_count: usize,
}

/// Collapses every run of whitespace into one space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits whitespace-normalized text into sentences.
///
/// A boundary is terminal punctuation (`.`, `!`, `?`), optionally followed by
/// closing quotes or brackets, then a space, then an uppercase letter or a
/// digit (possibly behind an opening quote or bracket). Periods closing a
/// known abbreviation or a single-letter initial never end a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let text = normalize_whitespace(text);
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}') {
                end += 1;
            }
            if end < chars.len()
                && chars[end] == ' '
                && opens_sentence(&chars[end + 1..])
                && !(c == '.' && is_abbreviation(&chars[start..i]))
            {
                let sentence: String = chars[start..end].iter().collect();
                sentences.push(sentence);
                start = end + 1;
                i = start;
                continue;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        if tail.chars().any(|c| !c.is_whitespace()) {
            sentences.push(tail);
        }
    }
    sentences
}

fn opens_sentence(rest: &[char]) -> bool {
    let mut it = rest
        .iter()
        .skip_while(|c| matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}'));
    matches!(it.next(), Some(c) if c.is_uppercase() || c.is_ascii_digit())
}

/// `before` is the sentence text up to (not including) the period.
fn is_abbreviation(before: &[char]) -> bool {
    let word: String = before
        .iter()
        .rev()
        .take_while(|c| !c.is_whitespace() && !matches!(c, '(' | '[' | '"'))
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if word.is_empty() {
        return false;
    }
    // Single-letter initials such as "J." in "J. Smith".
    if word.chars().count() == 1 && word.chars().all(char::is_alphabetic) {
        return true;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Text that gets segmented for a paper: abstract, introduction, and body.
/// The title is excluded.
pub fn segmentation_source(paper: &PaperRecord) -> String {
    let mut parts = vec![paper.abstract_text.as_str(), paper.introduction.as_str()];
    if let Some(body) = paper.body.as_deref() {
        parts.push(body);
    }
    normalize_whitespace(&parts.join(" "))
}

/// Greedily groups consecutive sentences into segments of `target` sentences;
/// the last segment may be shorter. `target` of zero is treated as one.
pub fn segment_paper(paper: &PaperRecord, target: usize) -> Vec<Segment> {
    let target = target.max(1);
    let sentences = split_sentences(&segmentation_source(paper));
    sentences
        .chunks(target)
        .enumerate()
        .map(|(segment_id, group)| Segment {
            segment_id,
            paper_id: paper.paper_id.clone(),
            text: group.join(" "),
            sentence_count: group.len(),
        })
        .collect()
}

//! Paper records, the paper-pair dataset, and retrieval segmentation.

mod dataset;
mod segment;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{load_dataset, CategoryCounts, Dataset, ValidationReport, DATASET_COLUMNS};
pub use segment::{normalize_whitespace, segment_paper, segmentation_source, split_sentences, Segment};

/// Default number of sentences per retrieval segment.
pub const DEFAULT_SEGMENT_SENTENCES: usize = 3;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset schema error: missing column `{column}` (found `{found}` at position {position})")]
    MissingColumn {
        column: &'static str,
        found: String,
        position: usize,
    },
    #[error("dataset row {row}: expected {expected} fields, found {found} (cells must not contain tabs)")]
    FieldCount { row: usize, expected: usize, found: usize },
    #[error("dataset row {row}: column `{column}` must be 0 or 1, found `{value}`")]
    FlagValue {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("dataset row {row}: {field} must be non-empty")]
    EmptyField { row: usize, field: &'static str },
    #[error("dataset row {row}: duplicate paper id `{paper_id}`")]
    DuplicatePaper { row: usize, paper_id: String },
    #[error("dataset row {row} requested but the dataset has {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("malformed TSV: {0}")]
    Tsv(#[from] csv::Error),
    #[error("invalid paper record: {0}")]
    InvalidPaper(String),
}

/// One paper as extracted text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub introduction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_link: Option<String>,
}

impl PaperRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.paper_id.trim().is_empty() {
            return Err(CorpusError::InvalidPaper("paper_id is empty".into()));
        }
        if self.title.trim().is_empty() {
            return Err(CorpusError::InvalidPaper(format!("{}: title is empty", self.paper_id)));
        }
        if self.abstract_text.trim().is_empty() {
            return Err(CorpusError::InvalidPaper(format!(
                "{}: abstract is empty",
                self.paper_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffersBy {
    Method,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationLink {
    Cited,
    NotCited,
}

/// A dataset row: root topic, two papers, and the two category flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub topic_title: String,
    #[serde(default)]
    pub topic_description: Option<String>,
    pub paper_a: PaperRecord,
    pub paper_b: PaperRecord,
    pub differs_by: DiffersBy,
    pub citation_link: CitationLink,
}

impl PairSample {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.topic_title.trim().is_empty() {
            return Err(CorpusError::InvalidPaper("topic title is empty".into()));
        }
        self.paper_a.validate()?;
        self.paper_b.validate()?;
        if self.paper_a.paper_id == self.paper_b.paper_id {
            return Err(CorpusError::InvalidPaper(format!(
                "both papers share id `{}`",
                self.paper_a.paper_id
            )));
        }
        Ok(())
    }
}

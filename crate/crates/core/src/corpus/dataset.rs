//! The paper-pair dataset: an 11-column, tab-separated file with a header row.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::{CitationLink, CorpusError, DiffersBy, PairSample, PaperRecord};

/// Canonical column names, in file order.
pub const DATASET_COLUMNS: [&str; 11] = [
    "topic",
    "paper_1_link",
    "paper_1_title",
    "paper_1_abstract",
    "paper_1_introduction",
    "paper_2_link",
    "paper_2_title",
    "paper_2_abstract",
    "paper_2_introduction",
    "method_task",
    "cite_no",
];

/// Accepted spellings per column after lowercasing and dropping every
/// non-alphanumeric character ("Paper #1 arXiv Link" -> "paper1arxivlink").
const ALIASES: [&[&str]; 11] = [
    &["topic", "roottopic"],
    &["paper1link", "paper1arxivlink", "paper1arxiv", "paper1url"],
    &["paper1title"],
    &["paper1abstract"],
    &["paper1introduction", "paper1intro"],
    &["paper2link", "paper2arxivlink", "paper2arxiv", "paper2url"],
    &["paper2title"],
    &["paper2abstract"],
    &["paper2introduction", "paper2intro"],
    &["methodtask", "method"],
    &["citeno", "cite", "cited"],
];

fn normalize_header(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn check_header(header: &[String]) -> Result<(), CorpusError> {
    for (position, (column, aliases)) in DATASET_COLUMNS.iter().zip(ALIASES).enumerate() {
        let found = header.get(position).cloned().unwrap_or_default();
        if !aliases.contains(&normalize_header(&found).as_str()) {
            return Err(CorpusError::MissingColumn {
                column,
                found,
                position,
            });
        }
    }
    if header.len() != DATASET_COLUMNS.len() {
        return Err(CorpusError::FieldCount {
            row: 0,
            expected: DATASET_COLUMNS.len(),
            found: header.len(),
        });
    }
    Ok(())
}

fn parse_flag(row: usize, column: &'static str, value: &str) -> Result<bool, CorpusError> {
    match value.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(CorpusError::FlagValue {
            row,
            column,
            value: value.to_string(),
        }),
    }
}

fn non_empty(row: usize, field: &'static str, value: &str) -> Result<String, CorpusError> {
    if value.trim().is_empty() {
        Err(CorpusError::EmptyField { row, field })
    } else {
        Ok(value.to_string())
    }
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

/// `row` is the 1-based data row number (the header is row 0).
fn parse_row(row: usize, cells: &[String]) -> Result<PairSample, CorpusError> {
    if cells.len() != DATASET_COLUMNS.len() {
        return Err(CorpusError::FieldCount {
            row,
            expected: DATASET_COLUMNS.len(),
            found: cells.len(),
        });
    }
    let paper = |offset: usize, n: usize| -> Result<PaperRecord, CorpusError> {
        let (title_field, abstract_field) = if n == 1 {
            ("paper_1_title", "paper_1_abstract")
        } else {
            ("paper_2_title", "paper_2_abstract")
        };
        Ok(PaperRecord {
            paper_id: format!("row{row}-paper{n}"),
            source_link: optional(&cells[offset]),
            title: non_empty(row, title_field, &cells[offset + 1])?,
            abstract_text: non_empty(row, abstract_field, &cells[offset + 2])?,
            introduction: cells[offset + 3].clone(),
            body: None,
        })
    };
    let differs_by = if parse_flag(row, "method_task", &cells[9])? {
        DiffersBy::Task
    } else {
        DiffersBy::Method
    };
    let citation_link = if parse_flag(row, "cite_no", &cells[10])? {
        CitationLink::Cited
    } else {
        CitationLink::NotCited
    };
    Ok(PairSample {
        topic_title: non_empty(row, "topic", &cells[0])?,
        topic_description: None,
        paper_a: paper(1, 1)?,
        paper_b: paper(5, 2)?,
        differs_by,
        citation_link,
    })
}

fn read_records(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(record) => record?.iter().map(str::to_string).collect(),
        None => Vec::new(),
    };
    let mut rows = Vec::new();
    for record in records {
        rows.push(record?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn read_file(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads every row of a dataset file, failing on the first invalid row.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<PairSample>, CorpusError> {
    Ok(Dataset::parse(&read_file(path.as_ref())?)?.samples)
}

/// A parsed dataset that remembers its header so it can be written back out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub header: Vec<String>,
    pub samples: Vec<PairSample>,
}

impl Dataset {
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let (header, rows) = read_records(text)?;
        check_header(&header)?;
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, cells)| parse_row(i + 1, cells))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, samples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Self::parse(&read_file(path.as_ref())?)
    }

    /// 1-based row lookup.
    pub fn row(&self, row: usize) -> Result<&PairSample, CorpusError> {
        row.checked_sub(1)
            .and_then(|i| self.samples.get(i))
            .ok_or(CorpusError::RowOutOfRange {
                row,
                rows: self.samples.len(),
            })
    }

    /// Writes the dataset back as TSV with `\n` line endings.
    pub fn to_tsv(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for s in &self.samples {
            let flag = |b: bool| if b { "1" } else { "0" };
            let mut cells: Vec<&str> = vec![&s.topic_title];
            for p in [&s.paper_a, &s.paper_b] {
                cells.extend([
                    p.source_link.as_deref().unwrap_or(""),
                    &p.title,
                    &p.abstract_text,
                    &p.introduction,
                ]);
            }
            cells.push(flag(s.differs_by == DiffersBy::Task));
            cells.push(flag(s.citation_link == CitationLink::Cited));
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Checks every row and tallies the category split of the valid ones.
    /// Unlike [`Dataset::parse`] this keeps going past bad rows.
    pub fn validate_text(text: &str) -> Result<ValidationReport, CorpusError> {
        let (header, rows) = read_records(text)?;
        check_header(&header)?;
        let mut report = ValidationReport::default();
        for (i, cells) in rows.iter().enumerate() {
            report.rows += 1;
            match parse_row(i + 1, cells) {
                Ok(sample) => report.counts.add(&sample),
                Err(e) => report.errors.push((i + 1, e.to_string())),
            }
        }
        Ok(report)
    }

    pub fn validate_file(path: impl AsRef<Path>) -> Result<ValidationReport, CorpusError> {
        Self::validate_text(&read_file(path.as_ref())?)
    }
}

/// Pair counts by citation link and difference type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub cited_method: usize,
    pub cited_task: usize,
    pub not_cited_method: usize,
    pub not_cited_task: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, sample: &PairSample) {
        let slot = match (sample.citation_link, sample.differs_by) {
            (CitationLink::Cited, DiffersBy::Method) => &mut self.cited_method,
            (CitationLink::Cited, DiffersBy::Task) => &mut self.cited_task,
            (CitationLink::NotCited, DiffersBy::Method) => &mut self.not_cited_method,
            (CitationLink::NotCited, DiffersBy::Task) => &mut self.not_cited_task,
        };
        *slot += 1;
    }

    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a PairSample>) -> Self {
        let mut counts = Self::default();
        samples.into_iter().for_each(|s| counts.add(s));
        counts
    }

    pub fn cited(&self) -> usize {
        self.cited_method + self.cited_task
    }
    pub fn not_cited(&self) -> usize {
        self.not_cited_method + self.not_cited_task
    }
    pub fn method(&self) -> usize {
        self.cited_method + self.not_cited_method
    }
    pub fn task(&self) -> usize {
        self.cited_task + self.not_cited_task
    }
    pub fn total(&self) -> usize {
        self.cited() + self.not_cited()
    }
}

impl fmt::Display for CategoryCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>6} {:>6} {:>6}", "Category", "Method", "Task", "Total")?;
        writeln!(
            f,
            "{:<10} {:>6} {:>6} {:>6}",
            "Cited",
            self.cited_method,
            self.cited_task,
            self.cited()
        )?;
        writeln!(
            f,
            "{:<10} {:>6} {:>6} {:>6}",
            "Not Cited",
            self.not_cited_method,
            self.not_cited_task,
            self.not_cited()
        )?;
        write!(
            f,
            "{:<10} {:>6} {:>6} {:>6}",
            "Total",
            self.method(),
            self.task(),
            self.total()
        )
    }
}

/// Outcome of checking a dataset file row by row.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub rows: usize,
    pub counts: CategoryCounts,
    /// (1-based data row, message)
    pub errors: Vec<(usize, String)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} rows", self.rows)?;
        writeln!(f, "{}", self.counts)?;
        if !self.errors.is_empty() {
            let rows: Vec<String> = self.errors.iter().map(|(r, _)| r.to_string()).collect();
            writeln!(f, "invalid rows: {}", rows.join(", "))?;
            for (_, msg) in &self.errors {
                writeln!(f, "  {msg}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Topic\tPaper #1 arXiv Link\tPaper #1 Title\tPaper #1 Abstract\tPaper #1 Introduction\tPaper #2 arXiv Link\tPaper #2 Title\tPaper #2 Abstract\tPaper #2 Introduction\tMethod/Task\tCite/No";

    fn row(method_task: &str, cite: &str) -> String {
        format!("contrastive learning on graphs\thttps://a\tTitle A\tAbs A.\tIntro A.\t\tTitle B\tAbs B.\tIntro B.\t{method_task}\t{cite}")
    }

    #[test]
    fn flags_map_to_categories() {
        let text = format!("{HEADER}\n{}\n", row("1", "1"));
        let d = Dataset::parse(&text).unwrap();
        assert_eq!(d.samples[0].differs_by, DiffersBy::Task);
        assert_eq!(d.samples[0].citation_link, CitationLink::Cited);
        assert_eq!(d.samples[0].paper_b.source_link, None);
        let text = format!("{HEADER}\n{}\n", row("0", "0"));
        let d = Dataset::parse(&text).unwrap();
        assert_eq!(d.samples[0].differs_by, DiffersBy::Method);
        assert_eq!(d.samples[0].citation_link, CitationLink::NotCited);
    }

    #[test]
    fn header_only_is_empty() {
        let d = Dataset::parse(&format!("{HEADER}\n")).unwrap();
        assert!(d.samples.is_empty());
        let report = Dataset::validate_text(&format!("{HEADER}\n")).unwrap();
        assert_eq!(report.rows, 0);
        assert!(report.is_valid());
    }

    #[test]
    fn missing_column_is_named() {
        let header = HEADER.replace("\tCite/No", "");
        let err = Dataset::parse(&format!("{header}\n")).unwrap_err();
        assert!(
            matches!(err, CorpusError::MissingColumn { column: "cite_no", .. }),
            "{err}"
        );
    }

    #[test]
    fn bad_flag_reports_row() {
        let text = format!("{HEADER}\n{}\n{}\n", row("0", "1"), row("1", "2"));
        let err = Dataset::parse(&text).unwrap_err();
        assert!(
            matches!(
                err,
                CorpusError::FlagValue {
                    row: 2,
                    column: "cite_no",
                    ..
                }
            ),
            "{err}"
        );
        let report = Dataset::validate_text(&text).unwrap();
        assert_eq!(report.rows, 2);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].0, 2);
    }

    #[test]
    fn tab_inside_cell_is_rejected() {
        let text = format!("{HEADER}\n{}\n", row("0", "1").replace("Abs A.", "Abs\tA."));
        let err = Dataset::parse(&text).unwrap_err();
        assert!(
            matches!(err, CorpusError::FieldCount { row: 1, found: 12, .. }),
            "{err}"
        );
    }

    #[test]
    fn crlf_round_trips_after_newline_normalization() {
        let text = format!("{HEADER}\r\n{}\r\n{}\r\n", row("0", "1"), row("1", "0"));
        let d = Dataset::parse(&text).unwrap();
        assert_eq!(d.to_tsv(), text.replace("\r\n", "\n"));
    }

    #[test]
    fn counts_table_layout() {
        let text = format!("{HEADER}\n{}\n{}\n{}\n", row("0", "1"), row("1", "0"), row("1", "0"));
        let counts = CategoryCounts::from_samples(&Dataset::parse(&text).unwrap().samples);
        assert_eq!(
            (counts.cited(), counts.not_cited(), counts.method(), counts.task()),
            (1, 2, 1, 2)
        );
        let table = counts.to_string();
        assert!(table.starts_with("Category   Method   Task  Total"));
        assert!(table.ends_with("Total           1      2      3"));
    }

    #[test]
    fn row_lookup_is_one_based() {
        let text = format!("{HEADER}\n{}\n", row("0", "1"));
        let d = Dataset::parse(&text).unwrap();
        assert!(d.row(1).is_ok());
        assert!(matches!(d.row(0), Err(CorpusError::RowOutOfRange { .. })));
        assert!(matches!(d.row(2), Err(CorpusError::RowOutOfRange { .. })));
    }
}

//! Dataset model: records, ingestion from JSON-lines / CSV, and summaries.
//!
//! A record is one (question, gold answers, attempted answer) tuple, optionally
//! carrying a human-graded score, a justification, a free-text question type,
//! and a structural answer type.
//!
//! # File schemas
//!
//! JSON-lines, one object per line:
//! `{"id"?, "question", "gold", "attempt", "human_score"?, "justification"?,
//! "question_type"?, "answer_type"?}` where `gold` is a string or an array of
//! strings. CSV uses the same column names; multi-valued `gold` cells are
//! separated by `|||`, and an empty cell for an optional column means absent.
//! Records missing an `id` are assigned their 0-based position in the file.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A metric or human score, constrained to `[0, 1]`.
///
/// Construction rejects out-of-range values; nothing is clamped silently.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Score(f64);

impl Score {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Score(value))
        } else {
            Err(Error::ScoreOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Score {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Score::new(value)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let value = f64::deserialize(deserializer)?;
        Score::new(value).map_err(serde::de::Error::custom)
    }
}

/// The closed 16-value answer-type taxonomy used as the routing key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    SingleWord,
    Numerical,
    Paragraph,
    CodeSnippet,
    Sentence,
    Equation,
    Phrase,
    Name,
    Boolean,
    List,
    Symbol,
    SingleCharacter,
    Formula,
    LongParagraph,
    Essay,
    ShortParagraph,
}

impl AnswerType {
    pub const ALL: [AnswerType; 16] = [
        AnswerType::SingleWord,
        AnswerType::Numerical,
        AnswerType::Paragraph,
        AnswerType::CodeSnippet,
        AnswerType::Sentence,
        AnswerType::Equation,
        AnswerType::Phrase,
        AnswerType::Name,
        AnswerType::Boolean,
        AnswerType::List,
        AnswerType::Symbol,
        AnswerType::SingleCharacter,
        AnswerType::Formula,
        AnswerType::LongParagraph,
        AnswerType::Essay,
        AnswerType::ShortParagraph,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AnswerType::SingleWord => "single_word",
            AnswerType::Numerical => "numerical",
            AnswerType::Paragraph => "paragraph",
            AnswerType::CodeSnippet => "code_snippet",
            AnswerType::Sentence => "sentence",
            AnswerType::Equation => "equation",
            AnswerType::Phrase => "phrase",
            AnswerType::Name => "name",
            AnswerType::Boolean => "boolean",
            AnswerType::List => "list",
            AnswerType::Symbol => "symbol",
            AnswerType::SingleCharacter => "single_character",
            AnswerType::Formula => "formula",
            AnswerType::LongParagraph => "long_paragraph",
            AnswerType::Essay => "essay",
            AnswerType::ShortParagraph => "short_paragraph",
        }
    }
}

impl std::fmt::Display for AnswerType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for AnswerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnswerType::ALL
            .iter()
            .find(|t| t.label() == s)
            .copied()
            .ok_or_else(|| Error::UnknownAnswerType(s.to_string()))
    }
}

/// One evaluation record.
#[derive(Debug, Clone, PartialEq)]
pub struct QARecord {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub attempt: String,
    pub human_score: Option<Score>,
    pub justification: Option<String>,
    pub question_type: Option<String>,
    pub answer_type: Option<AnswerType>,
}

impl QARecord {
    /// Builds a record with the required fields; optional fields start absent.
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        gold_answers: Vec<String>,
        attempt: impl Into<String>,
    ) -> Result<Self> {
        let record = QARecord {
            id: id.into(),
            question: question.into(),
            gold_answers,
            attempt: attempt.into(),
            human_score: None,
            justification: None,
            question_type: None,
            answer_type: None,
        };
        record.validate()?;
        Ok(record)
    }

    fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() {
            return Err(Error::MalformedRecord("question is empty".into()));
        }
        if self.gold_answers.is_empty() {
            return Err(Error::NoGoldAnswers);
        }
        if self.gold_answers.iter().any(|g| g.trim().is_empty()) {
            return Err(Error::MalformedRecord("gold answer is empty".into()));
        }
        Ok(())
    }
}

/// Supported dataset file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    JsonLines,
    Csv,
}

/// An ordered collection of validated records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<QARecord>,
    source: String,
}

impl Dataset {
    /// Validates every record and id uniqueness.
    pub fn from_records(records: Vec<QARecord>, source: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for record in &records {
            record.validate()?;
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateRecordId(record.id.clone()));
            }
        }
        Ok(Dataset {
            records,
            source: source.into(),
        })
    }

    pub fn records(&self) -> &[QARecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn set_source(&mut self, source: impl Into<String>) {
        self.source = source.into();
    }

    pub fn record_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// Writes the dataset as JSON-lines.
    pub fn write_json_lines(&self, mut out: impl Write) -> Result<()> {
        for record in &self.records {
            let raw = RawRecord::from_record(record);
            let line =
                serde_json::to_string(&raw).map_err(|e| Error::MalformedRecord(e.to_string()))?;
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes the dataset as CSV with `|||`-joined gold answers.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(CSV_COLUMNS).map_err(csv_io_error)?;
        for record in &self.records {
            if record
                .gold_answers
                .iter()
                .any(|g| g.contains(GOLD_SEPARATOR))
            {
                return Err(Error::GoldSeparatorConflict);
            }
            writer
                .write_record([
                    record.id.as_str(),
                    record.question.as_str(),
                    &record.gold_answers.join(GOLD_SEPARATOR),
                    record.attempt.as_str(),
                    &record
                        .human_score
                        .map(|s| s.value().to_string())
                        .unwrap_or_default(),
                    record.justification.as_deref().unwrap_or(""),
                    record.question_type.as_deref().unwrap_or(""),
                    &record
                        .answer_type
                        .map(|t| t.label().to_string())
                        .unwrap_or_default(),
                ])
                .map_err(csv_io_error)?;
        }
        writer.flush()?;
        Ok(())
    }
}

const GOLD_SEPARATOR: &str = "|||";
const CSV_COLUMNS: [&str; 8] = [
    "id",
    "question",
    "gold",
    "attempt",
    "human_score",
    "justification",
    "question_type",
    "answer_type",
];

fn csv_io_error(e: csv::Error) -> Error {
    Error::MalformedRecord(e.to_string())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    question: String,
    gold: GoldField,
    attempt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    human_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    justification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer_type: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GoldField {
    One(String),
    Many(Vec<String>),
}

impl RawRecord {
    fn from_record(record: &QARecord) -> Self {
        let gold = if record.gold_answers.len() == 1 {
            GoldField::One(record.gold_answers[0].clone())
        } else {
            GoldField::Many(record.gold_answers.clone())
        };
        RawRecord {
            id: Some(record.id.clone()),
            question: record.question.clone(),
            gold,
            attempt: record.attempt.clone(),
            human_score: record.human_score.map(Score::value),
            justification: record.justification.clone(),
            question_type: record.question_type.clone(),
            answer_type: record.answer_type.map(|t| t.label().to_string()),
        }
    }

    fn into_record(self, position: usize) -> Result<QARecord> {
        let gold_answers = match self.gold {
            GoldField::One(s) => vec![s],
            GoldField::Many(v) => v,
        };
        let human_score = self.human_score.map(Score::new).transpose()?;
        let answer_type = self
            .answer_type
            .as_deref()
            .map(str::parse::<AnswerType>)
            .transpose()?;
        let record = QARecord {
            id: self.id.unwrap_or_else(|| position.to_string()),
            question: self.question,
            gold_answers,
            attempt: self.attempt,
            human_score,
            justification: self.justification,
            question_type: self.question_type,
            answer_type,
        };
        record.validate()?;
        Ok(record)
    }
}

/// Parses a dataset from a UTF-8 byte stream in the given format.
///
/// Records keep their file order. Errors carry the 1-based line number of the
/// offending line plus the reason; unknown `answer_type` labels and
/// out-of-range scores are reported as such.
pub fn parse_records(mut input: impl Read, format: DatasetFormat) -> Result<Dataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidUtf8)?;
    match format {
        DatasetFormat::JsonLines => parse_json_lines(&text),
        DatasetFormat::Csv => parse_csv(&text),
    }
}

fn parse_json_lines(text: &str) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line)
            .map_err(|e| Error::MalformedRecord(e.to_string()).at_line(line_no))?;
        let record = raw
            .into_record(records.len())
            .map_err(|e| e.at_line(line_no))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateRecordId(record.id).at_line(line_no));
        }
        records.push(record);
    }
    Ok(Dataset {
        records,
        source: "stream".into(),
    })
}

fn parse_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRecord(e.to_string()).at_line(1))?
        .clone();

    let mut column_of = BTreeMap::new();
    for (i, name) in headers.iter().enumerate() {
        if !CSV_COLUMNS.contains(&name) {
            return Err(Error::MalformedRecord(format!("unknown column `{name}`")).at_line(1));
        }
        column_of.insert(name.to_string(), i);
    }
    for required in ["question", "gold", "attempt"] {
        if !column_of.contains_key(required) {
            return Err(Error::MalformedRecord(format!("missing column `{required}`")).at_line(1));
        }
    }

    let field = |row: &csv::StringRecord, name: &str| -> Option<String> {
        column_of
            .get(name)
            .and_then(|&i| row.get(i))
            .map(str::to_string)
    };
    let optional = |row: &csv::StringRecord, name: &str| -> Option<String> {
        field(row, name).filter(|v| !v.is_empty())
    };

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, row) in reader.records().enumerate() {
        let line_no = index + 2;
        let row = row.map_err(|e| Error::MalformedRecord(e.to_string()).at_line(line_no))?;
        let gold_cell = field(&row, "gold").unwrap_or_default();
        let human_score = optional(&row, "human_score")
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::MalformedRecord(format!("invalid human_score `{v}`")))
                    .and_then(Score::new)
            })
            .transpose()
            .map_err(|e| e.at_line(line_no))?;
        let answer_type = optional(&row, "answer_type")
            .as_deref()
            .map(str::parse::<AnswerType>)
            .transpose()
            .map_err(|e| e.at_line(line_no))?;
        let record = QARecord {
            id: optional(&row, "id").unwrap_or_else(|| records.len().to_string()),
            question: field(&row, "question").unwrap_or_default(),
            gold_answers: gold_cell
                .split(GOLD_SEPARATOR)
                .map(str::to_string)
                .collect(),
            attempt: field(&row, "attempt").unwrap_or_default(),
            human_score,
            justification: optional(&row, "justification"),
            question_type: optional(&row, "question_type"),
            answer_type,
        };
        record.validate().map_err(|e| e.at_line(line_no))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateRecordId(record.id).at_line(line_no));
        }
        records.push(record);
    }
    Ok(Dataset {
        records,
        source: "stream".into(),
    })
}

/// Dataset-level summary: counts, human-score moments, and per-field
/// unique-value counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub record_count: usize,
    /// Records carrying a human score; the mean/std are taken over these.
    pub scored_count: usize,
    pub score_mean: Option<f64>,
    /// Population standard deviation (divide by n).
    pub score_std: Option<f64>,
    pub unique_counts: BTreeMap<String, usize>,
    pub per_type_counts: BTreeMap<AnswerType, usize>,
}

/// Summarizes a dataset. Unique-value counting trims leading/trailing
/// whitespace and is otherwise exact (case-sensitive); optional fields count
/// only present values. An empty dataset yields `None` score moments.
pub fn summarize(dataset: &Dataset) -> DatasetSummary {
    let records = dataset.records();

    let scores: Vec<f64> = records
        .iter()
        .filter_map(|r| r.human_score.map(Score::value))
        .collect();
    let (score_mean, score_std) = if scores.is_empty() {
        (None, None)
    } else {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()))
    };

    let mut unique_counts = BTreeMap::new();
    unique_counts.insert(
        "question".to_string(),
        count_unique(records.iter().map(|r| Some(r.question.as_str()))),
    );
    unique_counts.insert(
        "gold".to_string(),
        records
            .iter()
            .map(|r| {
                r.gold_answers
                    .iter()
                    .map(|g| g.trim().to_string())
                    .collect::<Vec<_>>()
            })
            .collect::<HashSet<_>>()
            .len(),
    );
    unique_counts.insert(
        "attempt".to_string(),
        count_unique(records.iter().map(|r| Some(r.attempt.as_str()))),
    );
    unique_counts.insert(
        "justification".to_string(),
        count_unique(records.iter().map(|r| r.justification.as_deref())),
    );
    unique_counts.insert(
        "question_type".to_string(),
        count_unique(records.iter().map(|r| r.question_type.as_deref())),
    );
    unique_counts.insert(
        "answer_type".to_string(),
        records
            .iter()
            .filter_map(|r| r.answer_type)
            .collect::<HashSet<_>>()
            .len(),
    );

    let mut per_type_counts = BTreeMap::new();
    for record in records {
        if let Some(t) = record.answer_type {
            *per_type_counts.entry(t).or_insert(0) += 1;
        }
    }

    DatasetSummary {
        record_count: records.len(),
        scored_count: scores.len(),
        score_mean,
        score_std,
        unique_counts,
        per_type_counts,
    }
}

fn count_unique<'a>(values: impl Iterator<Item = Option<&'a str>>) -> usize {
    values
        .flatten()
        .map(str::trim)
        .collect::<HashSet<_>>()
        .len()
}

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset ingestion, metrics, statistics, and routing.
#[derive(Debug, Error)]
pub enum Error {
    /// Wraps a validation error with the 1-based input line it came from.
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("score out of range: {0} (expected 0 <= score <= 1)")]
    ScoreOutOfRange(f64),

    #[error("unknown answer_type label `{0}`")]
    UnknownAnswerType(String),

    #[error("{0}")]
    MalformedRecord(String),

    #[error("duplicate record id `{0}`")]
    DuplicateRecordId(String),

    #[error("gold answer contains the reserved CSV separator `|||`")]
    GoldSeparatorConflict,

    #[error("input is not valid UTF-8")]
    InvalidUtf8,

    #[error("n-gram order must be at least 1")]
    InvalidNgramOrder,

    #[error("TF-IDF requires a nonempty corpus")]
    EmptyCorpus,

    #[error("token contains whitespace or is empty: `{0}`")]
    InvalidToken(String),

    #[error("invalid metric id `{0}`: must be a nonempty name without whitespace or commas")]
    InvalidMetricId(String),

    #[error("metric `{0}` is not registered")]
    UnknownMetric(String),

    #[error("tfidf_cosine requires a fitted TF-IDF model in the metric context")]
    MissingTfIdfModel,

    #[error("gold answer list is empty")]
    NoGoldAnswers,

    #[error("dataset has no records")]
    EmptyDataset,

    #[error("external grader request failed after {attempts} attempt(s): {reason}")]
    GraderUnavailable { attempts: u32, reason: String },

    #[error("external grader protocol error: {0}")]
    GraderProtocol(String),

    #[error("grader timeout must be greater than zero")]
    InvalidGraderTimeout,

    #[error("series length mismatch: {left} vs {right}")]
    SeriesLengthMismatch { left: usize, right: usize },

    #[error("{op} requires at least {min} observations, got {got}")]
    NotEnoughObservations {
        op: &'static str,
        min: usize,
        got: usize,
    },

    #[error("series contains a non-finite value")]
    NonFiniteValue,

    #[error("histogram requires at least one bin")]
    InvalidBinCount,

    #[error("score matrix has no human scores; this analysis requires the human column")]
    MissingHumanColumn,

    #[error("{count} record(s) carry no answer type; classify them before per-type analysis")]
    MissingAnswerTypes { count: usize },

    #[error("score matrix does not match the dataset: {0}")]
    MatrixDatasetMismatch(String),

    #[error("cannot classify an empty gold answer")]
    EmptyGold,

    #[error("routing table missing: {0}")]
    RoutingTableIncomplete(String),

    #[error("routing config: unknown metric id `{0}`")]
    UnknownRoutingMetric(String),

    #[error("routing fallback must be a built-in metric, got `{0}`")]
    NonBuiltinFallback(String),

    #[error("invalid routing config: {0}")]
    InvalidRoutingConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches a 1-based line number to a validation error.
    pub fn at_line(self, line: usize) -> Self {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! The metric suite: identifiers, evaluation context, the registry, and
//! whole-dataset evaluation into a score matrix.

mod builtin;
mod external;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, QARecord, Score};
use crate::error::{Error, Result};
use crate::exec;
use crate::text::{fit_tfidf, normalize, tokenize, NormalizationConfig, TfIdfModel};

pub use builtin::{
    bleu, edit_distance, exact_match, lcs_length, levenshtein_similarity, random_baseline, rouge_l,
    tfidf_cosine, token_f1, token_prf, token_recall, PrecisionRecallF1,
};
pub use external::{external_grade, ExternalGraderConfig, GradedAnswer};

/// Identifies a metric: one of the eight built-ins or a registered external
/// grader.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    ExactMatch,
    TokenF1,
    TokenRecall,
    Bleu,
    RougeL,
    Levenshtein,
    TfidfCosine,
    RandomBaseline,
    External(String),
}

impl MetricId {
    pub const BUILTINS: [MetricId; 8] = [
        MetricId::ExactMatch,
        MetricId::TokenF1,
        MetricId::TokenRecall,
        MetricId::Bleu,
        MetricId::RougeL,
        MetricId::Levenshtein,
        MetricId::TfidfCosine,
        MetricId::RandomBaseline,
    ];

    pub fn is_builtin(&self) -> bool {
        !matches!(self, MetricId::External(_))
    }

    pub fn name(&self) -> &str {
        match self {
            MetricId::ExactMatch => "exact_match",
            MetricId::TokenF1 => "token_f1",
            MetricId::TokenRecall => "token_recall",
            MetricId::Bleu => "bleu",
            MetricId::RougeL => "rouge_l",
            MetricId::Levenshtein => "levenshtein",
            MetricId::TfidfCosine => "tfidf_cosine",
            MetricId::RandomBaseline => "random_baseline",
            MetricId::External(name) => name,
        }
    }
}

impl std::fmt::Display for MetricId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(builtin) = MetricId::BUILTINS.iter().find(|m| m.name() == s) {
            return Ok(builtin.clone());
        }
        if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(Error::InvalidMetricId(s.to_string()));
        }
        Ok(MetricId::External(s.to_string()))
    }
}

impl Serialize for MetricId {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shared evaluation settings. The TF-IDF model is optional until something
/// needs `tfidf_cosine`; `evaluate_all` fits one over the dataset on demand.
#[derive(Debug, Clone)]
pub struct MetricContext {
    pub normalization: NormalizationConfig,
    pub tfidf_model: Option<Arc<TfIdfModel>>,
    pub bleu_max_n: usize,
    /// Floor applied to zero n-gram precisions so the geometric mean stays
    /// finite.
    pub bleu_smoothing_floor: f64,
    pub bleu_brevity_penalty: bool,
    pub random_seed: u64,
}

impl Default for MetricContext {
    fn default() -> Self {
        MetricContext {
            normalization: NormalizationConfig::default(),
            tfidf_model: None,
            bleu_max_n: 4,
            bleu_smoothing_floor: 1e-9,
            bleu_brevity_penalty: true,
            random_seed: 0,
        }
    }
}

/// Holds the built-in metrics plus any registered external graders.
#[derive(Debug, Clone, Default)]
pub struct MetricRegistry {
    external: BTreeMap<String, ExternalGraderConfig>,
}

impl MetricRegistry {
    /// A registry with only the built-ins.
    pub fn with_builtins() -> Self {
        MetricRegistry::default()
    }

    pub fn register_external(&mut self, cfg: ExternalGraderConfig) {
        self.external.insert(cfg.id.name().to_string(), cfg);
    }

    pub fn contains(&self, id: &MetricId) -> bool {
        id.is_builtin() || self.external.contains_key(id.name())
    }

    pub fn has_external(&self) -> bool {
        !self.external.is_empty()
    }

    /// Every registered id: the built-ins in canonical order, then external
    /// ids alphabetically.
    pub fn ids(&self) -> Vec<MetricId> {
        MetricId::BUILTINS
            .iter()
            .cloned()
            .chain(self.external.values().map(|cfg| cfg.id.clone()))
            .collect()
    }

    pub fn external_config(&self, id: &MetricId) -> Option<&ExternalGraderConfig> {
        self.external.get(id.name())
    }

    /// Scores one record with the named metric.
    pub fn score(&self, id: &MetricId, record: &QARecord, ctx: &MetricContext) -> Result<Score> {
        match id {
            MetricId::ExactMatch => exact_match(&record.gold_answers, &record.attempt, ctx),
            MetricId::TokenF1 => token_f1(&record.gold_answers, &record.attempt, ctx),
            MetricId::TokenRecall => token_recall(&record.gold_answers, &record.attempt, ctx),
            MetricId::Bleu => bleu(&record.gold_answers, &record.attempt, ctx),
            MetricId::RougeL => rouge_l(&record.gold_answers, &record.attempt, ctx),
            MetricId::Levenshtein => {
                levenshtein_similarity(&record.gold_answers, &record.attempt, ctx)
            }
            MetricId::TfidfCosine => tfidf_cosine(&record.gold_answers, &record.attempt, ctx),
            MetricId::RandomBaseline => random_baseline(&record.gold_answers, &record.attempt, ctx),
            MetricId::External(name) => {
                let cfg = self
                    .external
                    .get(name)
                    .ok_or_else(|| Error::UnknownMetric(name.clone()))?;
                external_grade(cfg, record).map(|graded| graded.score)
            }
        }
    }
}

/// A failed cell in an otherwise completed run (external grader errors).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub record_id: String,
    pub metric_id: MetricId,
    pub reason: String,
}

/// Records-by-metrics score table plus the human column when present.
///
/// Built-in metric cells are always populated; a `None` cell marks an
/// external-grader failure recorded in `failures`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    record_ids: Vec<String>,
    metric_ids: Vec<MetricId>,
    cells: Vec<Vec<Option<Score>>>,
    human: Vec<Option<Score>>,
    failures: Vec<CellFailure>,
}

impl ScoreMatrix {
    /// Assembles a matrix from raw parts, validating the shape.
    pub fn from_parts(
        record_ids: Vec<String>,
        metric_ids: Vec<MetricId>,
        cells: Vec<Vec<Option<Score>>>,
        human: Vec<Option<Score>>,
    ) -> Result<Self> {
        if cells.len() != record_ids.len() || human.len() != record_ids.len() {
            return Err(Error::MatrixDatasetMismatch(format!(
                "{} rows for {} record ids",
                cells.len(),
                record_ids.len()
            )));
        }
        if let Some(row) = cells.iter().find(|row| row.len() != metric_ids.len()) {
            return Err(Error::MatrixDatasetMismatch(format!(
                "row of width {} for {} metrics",
                row.len(),
                metric_ids.len()
            )));
        }
        Ok(ScoreMatrix {
            record_ids,
            metric_ids,
            cells,
            human,
            failures: Vec::new(),
        })
    }

    pub fn record_ids(&self) -> &[String] {
        &self.record_ids
    }

    pub fn metric_ids(&self) -> &[MetricId] {
        &self.metric_ids
    }

    pub fn record_count(&self) -> usize {
        self.record_ids.len()
    }

    pub fn cell(&self, row: usize, column: usize) -> Option<Score> {
        self.cells[row][column]
    }

    pub fn human(&self, row: usize) -> Option<Score> {
        self.human[row]
    }

    pub fn has_human_scores(&self) -> bool {
        self.human.iter().any(Option::is_some)
    }

    /// One metric's column as raw values (`None` marks a failed cell).
    pub fn metric_column(&self, id: &MetricId) -> Option<Vec<Option<f64>>> {
        let column = self.metric_ids.iter().position(|m| m == id)?;
        Some(
            self.cells
                .iter()
                .map(|row| row[column].map(Score::value))
                .collect(),
        )
    }

    pub fn column_values(&self, column: usize) -> Vec<Option<f64>> {
        self.cells
            .iter()
            .map(|row| row[column].map(Score::value))
            .collect()
    }

    pub fn human_values(&self) -> Vec<Option<f64>> {
        self.human.iter().map(|s| s.map(Score::value)).collect()
    }

    pub fn failures(&self) -> &[CellFailure] {
        &self.failures
    }
}

/// Scores every record against every requested metric.
///
/// Rows are evaluated in parallel when the `parallel` feature is enabled;
/// cell values are independent of scheduling, so results match the
/// sequential path bit for bit. External-grader failures leave a `None`
/// cell and a recorded failure; the run continues.
pub fn evaluate_all(
    dataset: &Dataset,
    metric_ids: &[MetricId],
    registry: &MetricRegistry,
    ctx: &MetricContext,
) -> Result<ScoreMatrix> {
    evaluate_all_impl(dataset, metric_ids, registry, ctx, false)
}

/// Single-threaded `evaluate_all`, regardless of the `parallel` feature.
pub fn evaluate_all_sequential(
    dataset: &Dataset,
    metric_ids: &[MetricId],
    registry: &MetricRegistry,
    ctx: &MetricContext,
) -> Result<ScoreMatrix> {
    evaluate_all_impl(dataset, metric_ids, registry, ctx, true)
}

fn evaluate_all_impl(
    dataset: &Dataset,
    metric_ids: &[MetricId],
    registry: &MetricRegistry,
    ctx: &MetricContext,
    force_sequential: bool,
) -> Result<ScoreMatrix> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for id in metric_ids {
        if !registry.contains(id) {
            return Err(Error::UnknownMetric(id.name().to_string()));
        }
    }

    let mut effective = ctx.clone();
    if metric_ids.contains(&MetricId::TfidfCosine) && effective.tfidf_model.is_none() {
        effective.tfidf_model = Some(Arc::new(fit_dataset_tfidf(dataset, ctx)?));
    }
    let ctx = &effective;

    let score_row = |_, record: &QARecord| -> Vec<std::result::Result<Score, String>> {
        metric_ids
            .iter()
            .map(|id| registry.score(id, record, ctx).map_err(|e| e.to_string()))
            .collect()
    };
    let rows = if force_sequential {
        exec::map_indexed_sequential(dataset.records(), score_row)
    } else {
        exec::map_indexed(dataset.records(), score_row)
    };

    let mut cells = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for (record, row) in dataset.records().iter().zip(rows) {
        let mut out = Vec::with_capacity(row.len());
        for (id, outcome) in metric_ids.iter().zip(row) {
            match outcome {
                Ok(score) => out.push(Some(score)),
                Err(reason) => {
                    failures.push(CellFailure {
                        record_id: record.id.clone(),
                        metric_id: id.clone(),
                        reason,
                    });
                    out.push(None);
                }
            }
        }
        cells.push(out);
    }

    Ok(ScoreMatrix {
        record_ids: dataset.record_ids(),
        metric_ids: metric_ids.to_vec(),
        cells,
        human: dataset.records().iter().map(|r| r.human_score).collect(),
        failures,
    })
}

/// Fits the shared TF-IDF model over every gold answer and every attempt in
/// the dataset (one document each), under the context's normalization.
pub fn fit_dataset_tfidf(dataset: &Dataset, ctx: &MetricContext) -> Result<TfIdfModel> {
    let mut docs = Vec::with_capacity(dataset.len() * 2);
    for record in dataset.records() {
        for gold in &record.gold_answers {
            docs.push(tokenize(&normalize(gold, &ctx.normalization)));
        }
        docs.push(tokenize(&normalize(&record.attempt, &ctx.normalization)));
    }
    fit_tfidf(&docs)
}

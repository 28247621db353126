//! Report emitters: the score-matrix CSV (write and read back), analysis
//! CSVs, and the JSON run report.
//!
//! Output is deterministic: fixed six-decimal score formatting, `undefined`
//! markers for undefined correlations, BTree-ordered sections, and no
//! timestamps. Two runs with the same inputs produce identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use qa_eval_core::stats::{CorrelationMatrix, HistogramBin, TypedBreakdown};
use qa_eval_core::{CellFailure, DatasetSummary, MetricId, Score, ScoreMatrix};

pub fn fmt_score(value: f64) -> String {
    format!("{value:.6}")
}

pub fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => fmt_score(v),
        None => "undefined".to_string(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// Writes the score matrix: one row per record, one column per metric, the
/// human column last. Failed or absent cells are empty.
pub fn write_matrix_csv(path: &Path, matrix: &ScoreMatrix) -> Result<()> {
    let mut writer = csv_writer(path)?;
    let mut header = vec!["record_id".to_string()];
    header.extend(matrix.metric_ids().iter().map(|m| m.name().to_string()));
    header.push("human".to_string());
    writer.write_record(&header)?;
    for (row, id) in matrix.record_ids().iter().enumerate() {
        let mut record = vec![id.clone()];
        for column in 0..matrix.metric_ids().len() {
            record.push(
                matrix
                    .cell(row, column)
                    .map(|s| fmt_score(s.value()))
                    .unwrap_or_default(),
            );
        }
        record.push(
            matrix
                .human(row)
                .map(|s| fmt_score(s.value()))
                .unwrap_or_default(),
        );
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a matrix CSV written by [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<ScoreMatrix> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let columns: Vec<&str> = headers.iter().collect();
    if columns.first() != Some(&"record_id") || columns.last() != Some(&"human") {
        bail!(
            "{} is not a score matrix (expected record_id ... human columns)",
            path.display()
        );
    }
    let metric_ids: Vec<MetricId> = columns[1..columns.len() - 1]
        .iter()
        .map(|name| name.parse::<MetricId>())
        .collect::<std::result::Result<_, _>>()?;

    let parse_cell = |cell: &str, line: usize| -> Result<Option<Score>> {
        if cell.is_empty() {
            return Ok(None);
        }
        let value: f64 = cell
            .parse()
            .with_context(|| format!("line {line}: invalid score `{cell}`"))?;
        Ok(Some(Score::new(value).with_context(|| {
            format!("line {line}: score out of range")
        })?))
    };

    let mut record_ids = Vec::new();
    let mut cells = Vec::new();
    let mut human = Vec::new();
    for (index, row) in reader.records().enumerate() {
        let line = index + 2;
        let row = row?;
        if row.len() != columns.len() {
            bail!(
                "line {line}: expected {} fields, got {}",
                columns.len(),
                row.len()
            );
        }
        record_ids.push(row[0].to_string());
        let mut out = Vec::with_capacity(metric_ids.len());
        for cell in row.iter().take(columns.len() - 1).skip(1) {
            out.push(parse_cell(cell, line)?);
        }
        cells.push(out);
        human.push(parse_cell(&row[columns.len() - 1], line)?);
    }
    Ok(ScoreMatrix::from_parts(
        record_ids, metric_ids, cells, human,
    )?)
}

/// Writes one correlation matrix: `label` header, one row per label,
/// `undefined` for undefined cells.
pub fn write_correlation_csv(path: &Path, matrix: &CorrelationMatrix) -> Result<()> {
    let mut writer = csv_writer(path)?;
    let mut header = vec!["label".to_string()];
    header.extend(matrix.labels().iter().cloned());
    writer.write_record(&header)?;
    for (row, label) in matrix.labels().iter().enumerate() {
        let mut record = vec![label.clone()];
        for column in 0..matrix.labels().len() {
            record.push(fmt_opt(matrix.get(row, column)));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// One row of the mean-delta table.
pub struct MeanDeltaRow {
    pub scope: String,
    pub metric: String,
    pub mean_delta: Option<f64>,
    pub scored_count: usize,
    pub low_support: Option<bool>,
}

pub fn write_mean_delta_csv(path: &Path, rows: &[MeanDeltaRow]) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer.write_record([
        "scope",
        "metric",
        "mean_score_delta",
        "scored_count",
        "low_support",
    ])?;
    for row in rows {
        writer.write_record([
            row.scope.as_str(),
            row.metric.as_str(),
            &fmt_opt(row.mean_delta),
            &row.scored_count.to_string(),
            &row.low_support.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-type per-method correlation breakdown, long format.
pub fn write_per_type_csv(path: &Path, breakdowns: &[TypedBreakdown]) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer.write_record([
        "method",
        "answer_type",
        "metric",
        "correlation",
        "scored_count",
        "low_support",
    ])?;
    for breakdown in breakdowns {
        for (answer_type, entry) in &breakdown.entries {
            for (metric, correlation) in &entry.correlations {
                writer.write_record([
                    breakdown.method.name(),
                    answer_type.label(),
                    metric.name(),
                    &fmt_opt(*correlation),
                    &entry.scored_count.to_string(),
                    &entry.low_support.to_string(),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// One histogram series for the histogram CSV.
pub struct HistogramSeries {
    pub series: String,
    pub scope: String,
    pub bins: Vec<HistogramBin>,
}

pub fn write_histograms_csv(path: &Path, series: &[HistogramSeries]) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer.write_record(["series", "scope", "bin_start", "bin_end", "count"])?;
    for entry in series {
        for bin in &entry.bins {
            writer.write_record([
                entry.series.as_str(),
                entry.scope.as_str(),
                &fmt_score(bin.start),
                &fmt_score(bin.end),
                &bin.count.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// One row of the classification CSV.
pub struct ClassificationRow {
    pub record_id: String,
    pub given_type: Option<String>,
    pub classified_type: String,
    pub fired_rule: String,
}

pub fn write_classifications_csv(path: &Path, rows: &[ClassificationRow]) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer.write_record(["record_id", "given_type", "classified_type", "fired_rule"])?;
    for row in rows {
        writer.write_record([
            row.record_id.as_str(),
            row.given_type.as_deref().unwrap_or(""),
            row.classified_type.as_str(),
            row.fired_rule.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One row of the routed-scores CSV.
pub struct RoutedRow {
    pub record_id: String,
    pub answer_type: String,
    pub metric_used: String,
    pub score: f64,
    pub fallback_used: bool,
    pub fired_rule: String,
}

pub fn write_routed_csv(path: &Path, rows: &[RoutedRow]) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer.write_record([
        "record_id",
        "answer_type",
        "metric_used",
        "score",
        "fallback_used",
        "fired_rule",
    ])?;
    for row in rows {
        writer.write_record([
            row.record_id.as_str(),
            row.answer_type.as_str(),
            row.metric_used.as_str(),
            &fmt_score(row.score),
            &row.fallback_used.to_string(),
            row.fired_rule.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Routing usage counters for the run report.
#[derive(Debug, Default, Serialize)]
pub struct RoutingReport {
    pub per_type_counts: BTreeMap<String, usize>,
    pub per_metric_counts: BTreeMap<String, usize>,
    pub fallback_count: usize,
    pub fallback_rate: f64,
}

#[derive(Debug, Serialize)]
pub struct SkippedRecord {
    pub record_id: String,
    pub reason: String,
}

/// The machine-readable run report written next to the CSVs.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub dataset_source: String,
    pub record_count: usize,
    /// Records that entered the analysis/scoring stage.
    pub scored_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<DatasetSummary>,
    pub metrics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_matrix_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_delta_global: Option<BTreeMap<String, Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier_agreement: Option<f64>,
    pub skipped_records: Vec<SkippedRecord>,
    pub failures: Vec<CellFailure>,
}

impl RunReport {
    pub fn new(command: &str, config_hash: String, dataset_source: &str) -> Self {
        RunReport {
            tool: "qa-eval",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash,
            dataset_source: dataset_source.to_string(),
            record_count: 0,
            scored_count: 0,
            summary: None,
            metrics: Vec::new(),
            correlation_methods: None,
            score_matrix_file: None,
            mean_delta_global: None,
            routing: None,
            classifier_agreement: None,
            skipped_records: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        );
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }
}

/// Hash of everything that shaped the run: command, flags, and config text.
pub fn config_hash(parts: &[(&str, &str)]) -> String {
    let mut hasher = Sha256::new();
    for (key, value) in parts {
        hasher.update(key.as_bytes());
        hasher.update([0x1e]);
        hasher.update(value.as_bytes());
        hasher.update([0x1f]);
    }
    hex_digest(&hasher.finalize())
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

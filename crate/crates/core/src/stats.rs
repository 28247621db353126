//! Agreement statistics between metric scores and human scores: mean score
//! delta, Pearson/Spearman/Kendall correlations, correlation matrices,
//! per-answer-type breakdowns, and score histograms.
//!
//! Correlations return `Ok(None)` — an explicit undefined marker, never NaN —
//! when a series has zero variance (all values equal) or too few paired
//! observations.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataset::{AnswerType, Dataset, Score};
use crate::error::{Error, Result};
use crate::metrics::{MetricId, ScoreMatrix};

/// Types with fewer scored records than this are flagged low-support in
/// per-type breakdowns (they are still reported).
pub const DEFAULT_MIN_SUPPORT: usize = 3;

/// A labeled sequence of finite score values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    label: String,
    values: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(ScoreSeries {
            label: label.into(),
            values,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_pair(op: &'static str, x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::SeriesLengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min {
        return Err(Error::NotEnoughObservations {
            op,
            min,
            got: x.len(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    Ok(())
}

/// Mean absolute distance between a metric series and the human series:
/// `sum(|s_i - h_i|) / n`.
pub fn mean_score_delta(metric: &[f64], human: &[f64]) -> Result<f64> {
    check_pair("mean_score_delta", metric, human, 1)?;
    let n = metric.len() as f64;
    Ok(metric
        .iter()
        .zip(human)
        .map(|(s, h)| (s - h).abs())
        .sum::<f64>()
        / n)
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn pearson_core(x: &[f64], y: &[f64]) -> Option<f64> {
    if is_constant(x) || is_constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some((cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair("pearson", x, y, 2)?;
    Ok(pearson_core(x, y))
}

/// Fractional ranks with ties averaged (mid-rank method), 1-based.
fn rank_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j + 1) as f64 / 2.0;
        for &index in &order[i..j] {
            ranks[index] = mean_rank;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation: Pearson over mid-ranked values.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair("spearman", x, y, 2)?;
    Ok(pearson_core(&rank_with_ties(x), &rank_with_ties(y)))
}

/// Kendall tau-b with tie correction:
/// `(C - D) / sqrt((C + D + Tx)(C + D + Ty))` where `Tx`/`Ty` count pairs
/// tied only in that series. `None` when every pair is tied in one series.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair("kendall_tau", x, y, 2)?;
    let n = x.len();
    let mut concordant: u64 = 0;
    let mut discordant: u64 = 0;
    let mut ties_x_only: u64 = 0;
    let mut ties_y_only: u64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                ties_x_only += 1;
            } else if dy == 0.0 {
                ties_y_only += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let left = (concordant + discordant + ties_x_only) as f64;
    let right = (concordant + discordant + ties_y_only) as f64;
    if left == 0.0 || right == 0.0 {
        return Ok(None);
    }
    let tau = (concordant as f64 - discordant as f64) / (left * right).sqrt();
    Ok(Some(tau.clamp(-1.0, 1.0)))
}

/// Correlation flavor for matrices and breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
    Kendall,
}

impl CorrelationMethod {
    pub const ALL: [CorrelationMethod; 3] = [
        CorrelationMethod::Pearson,
        CorrelationMethod::Spearman,
        CorrelationMethod::Kendall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Kendall => "kendall",
        }
    }

    pub fn compute(self, x: &[f64], y: &[f64]) -> Result<Option<f64>> {
        match self {
            CorrelationMethod::Pearson => pearson(x, y),
            CorrelationMethod::Spearman => spearman(x, y),
            CorrelationMethod::Kendall => kendall_tau(x, y),
        }
    }
}

impl std::fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CorrelationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorrelationMethod::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::MalformedRecord(format!("unknown correlation method `{s}`")))
    }
}

/// Symmetric correlation matrix over metric columns plus the human column.
/// Cells are computed once and mirrored; `None` marks undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    method: CorrelationMethod,
    labels: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn method(&self) -> CorrelationMethod {
        self.method
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, row: usize, column: usize) -> Option<f64> {
        self.cells[row][column]
    }

    pub fn get_by_label(&self, row: &str, column: &str) -> Option<Option<f64>> {
        let r = self.labels.iter().position(|l| l == row)?;
        let c = self.labels.iter().position(|l| l == column)?;
        Some(self.cells[r][c])
    }
}

/// Column series paired over rows where both sides are present.
fn paired(a: &[Option<f64>], b: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            xs.push(*x);
            ys.push(*y);
        }
    }
    (xs, ys)
}

fn correlate_columns(
    method: CorrelationMethod,
    a: &[Option<f64>],
    b: &[Option<f64>],
) -> Option<f64> {
    let (xs, ys) = paired(a, b);
    if xs.len() < 2 {
        return None;
    }
    method.compute(&xs, &ys).expect("validated pair")
}

/// Correlates every metric column (plus human, labeled `human`) against every
/// other. Requires at least 2 records and a populated human column.
pub fn correlation_matrix(
    matrix: &ScoreMatrix,
    method: CorrelationMethod,
) -> Result<CorrelationMatrix> {
    if matrix.record_count() < 2 {
        return Err(Error::NotEnoughObservations {
            op: "correlation_matrix",
            min: 2,
            got: matrix.record_count(),
        });
    }
    if !matrix.has_human_scores() {
        return Err(Error::MissingHumanColumn);
    }

    let mut labels: Vec<String> = matrix
        .metric_ids()
        .iter()
        .map(|m| m.name().to_string())
        .collect();
    labels.push("human".to_string());

    let mut columns: Vec<Vec<Option<f64>>> = (0..matrix.metric_ids().len())
        .map(|c| matrix.column_values(c))
        .collect();
    columns.push(matrix.human_values());

    let k = columns.len();
    let mut cells = vec![vec![None; k]; k];
    for i in 0..k {
        cells[i][i] = correlate_columns(method, &columns[i], &columns[i]);
        for j in (i + 1)..k {
            let value = correlate_columns(method, &columns[i], &columns[j]);
            cells[i][j] = value;
            cells[j][i] = value;
        }
    }

    Ok(CorrelationMatrix {
        method,
        labels,
        cells,
    })
}

/// One histogram bucket over `[start, end)`; the last bucket is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

/// Equal-width histogram over `[0, 1]`; counts always sum to the input
/// length.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::InvalidBinCount);
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        let index = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[index] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            start: i as f64 / bins as f64,
            end: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect())
}

/// Per-type statistics for one answer type.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeAnalysis {
    /// Records of this type.
    pub count: usize,
    /// Those that carry a human score; analyses run over these.
    pub scored_count: usize,
    pub low_support: bool,
    /// Per metric: correlation against the human column (undefined marked).
    pub correlations: Vec<(MetricId, Option<f64>)>,
    /// Per metric: mean score delta against the human column.
    pub mean_deltas: Vec<(MetricId, Option<f64>)>,
    /// Distribution of the human scores for this type.
    pub human_histogram: Vec<HistogramBin>,
}

/// Per-answer-type breakdown of metric/human agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedBreakdown {
    pub method: CorrelationMethod,
    pub min_support: usize,
    pub entries: BTreeMap<AnswerType, TypeAnalysis>,
}

/// Groups records by answer type and reruns the agreement analyses within
/// each group. Every record must carry a type (given or classified); types
/// below `min_support` scored records are flagged, not dropped.
pub fn per_type_analysis(
    dataset: &Dataset,
    matrix: &ScoreMatrix,
    method: CorrelationMethod,
    bins: usize,
    min_support: usize,
) -> Result<TypedBreakdown> {
    if dataset.record_ids() != matrix.record_ids() {
        return Err(Error::MatrixDatasetMismatch(
            "record ids differ or are ordered differently".into(),
        ));
    }
    let untyped = dataset
        .records()
        .iter()
        .filter(|r| r.answer_type.is_none())
        .count();
    if untyped > 0 {
        return Err(Error::MissingAnswerTypes { count: untyped });
    }
    if !matrix.has_human_scores() {
        return Err(Error::MissingHumanColumn);
    }

    let mut rows_by_type: BTreeMap<AnswerType, Vec<usize>> = BTreeMap::new();
    for (row, record) in dataset.records().iter().enumerate() {
        rows_by_type
            .entry(record.answer_type.expect("checked above"))
            .or_default()
            .push(row);
    }

    let human = matrix.human_values();
    let mut entries = BTreeMap::new();
    for (answer_type, rows) in rows_by_type {
        let type_human: Vec<Option<f64>> = rows.iter().map(|&r| human[r]).collect();
        let scored: Vec<f64> = type_human.iter().flatten().copied().collect();

        let mut correlations = Vec::new();
        let mut mean_deltas = Vec::new();
        for (column, id) in matrix.metric_ids().iter().enumerate() {
            let type_metric: Vec<Option<f64>> = rows
                .iter()
                .map(|&r| matrix.cell(r, column).map(Score::value))
                .collect();
            correlations.push((
                id.clone(),
                correlate_columns(method, &type_metric, &type_human),
            ));
            let (xs, ys) = paired(&type_metric, &type_human);
            let delta = if xs.is_empty() {
                None
            } else {
                Some(mean_score_delta(&xs, &ys)?)
            };
            mean_deltas.push((id.clone(), delta));
        }

        entries.insert(
            answer_type,
            TypeAnalysis {
                count: rows.len(),
                scored_count: scored.len(),
                low_support: scored.len() < min_support,
                correlations,
                mean_deltas,
                human_histogram: histogram(&scored, bins)?,
            },
        );
    }

    Ok(TypedBreakdown {
        method,
        min_support,
        entries,
    })
}

//! Batch question-answering evaluation.
//!
//! The crate scores (gold answers, attempt) pairs with a suite of lexical
//! metrics, measures how well each metric tracks a human-graded score column
//! (mean score delta, Pearson/Spearman/Kendall correlations, per-answer-type
//! breakdowns), and provides a type-routed grader that classifies each answer
//! into one of 16 structural types and picks the metric configured for that
//! type.
//!
//! Batch evaluation and routing run data-parallel via rayon when the
//! `parallel` feature (on by default) is enabled; disabling it yields a fully
//! sequential build with the same results.
//!
//! ```
//! use qa_eval_core::{
//!     evaluate_all, parse_records, DatasetFormat, MetricContext, MetricId, MetricRegistry,
//! };
//! use qa_eval_core::routing::{default_routing_table, route_dataset, ClassifierConfig};
//! use qa_eval_core::stats::{correlation_matrix, CorrelationMethod};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let data = r#"{"question":"What is the capital of France?","gold":"Paris","attempt":"Pariss","human_score":0.8}
//! {"question":"Name a primary color.","gold":["red","blue","yellow"],"attempt":"blue","human_score":1.0}
//! {"question":"Is the Sun a star?","gold":"yes","attempt":"no","human_score":0.0}"#;
//! let dataset = parse_records(data.as_bytes(), DatasetFormat::JsonLines)?;
//!
//! // Score every record with the full metric suite.
//! let registry = MetricRegistry::with_builtins();
//! let ctx = MetricContext::default();
//! let matrix = evaluate_all(&dataset, &MetricId::BUILTINS, &registry, &ctx)?;
//! assert_eq!(matrix.record_count(), 3);
//! assert_eq!(matrix.cell(1, 0).unwrap().value(), 1.0); // exact match on "blue"
//!
//! // How well does each metric track the human column?
//! let correlations = correlation_matrix(&matrix, CorrelationMethod::Pearson)?;
//! assert!(correlations.labels().contains(&"human".to_string()));
//!
//! // Or grade each record with the metric routed for its answer type.
//! let routed = route_dataset(
//!     &dataset,
//!     &default_routing_table(),
//!     &registry,
//!     &ctx,
//!     &ClassifierConfig::default(),
//! )?;
//! assert_eq!(routed[2].metric_used, MetricId::ExactMatch); // "yes" is a boolean
//! # Ok(())
//! # }
//! ```

pub mod dataset;
pub mod error;
mod exec;
pub mod fixtures;
pub mod metrics;
pub mod routing;
pub mod stats;
pub mod text;

pub use dataset::{
    parse_records, summarize, AnswerType, Dataset, DatasetFormat, DatasetSummary, QARecord, Score,
};
pub use error::{Error, Result};
pub use metrics::{
    evaluate_all, evaluate_all_sequential, external_grade, CellFailure, ExternalGraderConfig,
    GradedAnswer, MetricContext, MetricId, MetricRegistry, ScoreMatrix,
};
pub use routing::{
    classify_answer_type, classify_with, default_routing_config_json, default_routing_table,
    default_routing_table_with_grader, load_routing_config, route_dataset, route_score,
    Classification, ClassifierConfig, RoutedScore, RoutingConfig, RoutingTable, TRUSTED_LABEL_RULE,
};
pub use stats::{
    correlation_matrix, histogram, kendall_tau, mean_score_delta, pearson, per_type_analysis,
    spearman, CorrelationMatrix, CorrelationMethod, HistogramBin, ScoreSeries, TypeAnalysis,
    TypedBreakdown, DEFAULT_MIN_SUPPORT,
};
pub use text::{
    cosine_similarity, fit_tfidf, ngrams, normalize, tokenize, vectorize, NormalizationConfig,
    SparseVector, TfIdfModel, TokenSeq,
};

//! The four pipeline commands: evaluate, analyze, classify, route.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};

use qa_eval_core::routing::{
    classify_with, default_routing_config_json, default_routing_table,
    default_routing_table_with_grader, load_routing_config, route_dataset, ClassifierConfig,
    RoutingTable, TRUSTED_LABEL_RULE,
};
use qa_eval_core::stats::{
    correlation_matrix, histogram, mean_score_delta, per_type_analysis, CorrelationMethod,
    TypedBreakdown, DEFAULT_MIN_SUPPORT,
};
use qa_eval_core::{
    evaluate_all, parse_records, summarize, AnswerType, Dataset, DatasetFormat,
    ExternalGraderConfig, MetricContext, MetricId, MetricRegistry, ScoreMatrix,
};

use crate::report::{
    config_hash, fmt_score, write_classifications_csv, write_correlation_csv, write_histograms_csv,
    write_matrix_csv, write_mean_delta_csv, write_per_type_csv, write_routed_csv,
    ClassificationRow, HistogramSeries, MeanDeltaRow, RoutedRow, RoutingReport, RunReport,
    SkippedRecord,
};

/// Grader id registered for `--grader-endpoint`.
const GRADER_METRIC_NAME: &str = "grader";
const GRADER_TIMEOUT: Duration = Duration::from_secs(10);
const GRADER_MAX_RETRIES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[value(name = "json-lines")]
    JsonLines,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pearson,
    Spearman,
    Kendall,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<CorrelationMethod> {
        match self {
            MethodArg::Pearson => vec![CorrelationMethod::Pearson],
            MethodArg::Spearman => vec![CorrelationMethod::Spearman],
            MethodArg::Kendall => vec![CorrelationMethod::Kendall],
            MethodArg::All => CorrelationMethod::ALL.to_vec(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            MethodArg::Pearson => "pearson",
            MethodArg::Spearman => "spearman",
            MethodArg::Kendall => "kendall",
            MethodArg::All => "all",
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset file (JSON-lines or CSV).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Comma-separated metric ids; defaults to every registered metric.
    #[arg(long)]
    pub metrics: Option<String>,
    /// External grader endpoint (registered as metric id `grader`).
    #[arg(long, env = "QA_EVAL_GRADER_ENDPOINT")]
    pub grader_endpoint: Option<String>,
    /// Seed for the random baseline.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Exit nonzero when any grader cell fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Dataset file; computes the score matrix before analyzing.
    #[arg(long, conflicts_with = "matrix")]
    pub dataset: Option<PathBuf>,
    /// Previously written scores.csv; global analyses only.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub metrics: Option<String>,
    /// Correlation method(s) to compute.
    #[arg(long, value_enum, default_value = "pearson")]
    pub method: MethodArg,
    /// Histogram bin count.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Routing config (used for its classifier thresholds).
    #[arg(long)]
    pub routing: Option<PathBuf>,
    #[arg(long, env = "QA_EVAL_GRADER_ENDPOINT")]
    pub grader_endpoint: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Routing config (used for its classifier thresholds).
    #[arg(long)]
    pub routing: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    /// Dataset file; required unless --dump-config is given.
    #[arg(long, required_unless_present = "dump_config")]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Routing config JSON; the embedded default is used when omitted.
    #[arg(long)]
    pub routing: Option<PathBuf>,
    #[arg(long, env = "QA_EVAL_GRADER_ENDPOINT")]
    pub grader_endpoint: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Exit nonzero when any record needed the fallback metric.
    #[arg(long)]
    pub strict: bool,
    /// Ignore given answer_type labels and classify every record.
    #[arg(long)]
    pub reclassify: bool,
    /// Print the embedded default routing config and exit.
    #[arg(long)]
    pub dump_config: bool,
}

fn load_dataset(path: &Path, format: Option<FormatArg>) -> Result<Dataset> {
    let format = match format {
        Some(FormatArg::JsonLines) => DatasetFormat::JsonLines,
        Some(FormatArg::Csv) => DatasetFormat::Csv,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::JsonLines,
        },
    };
    let file =
        fs::File::open(path).with_context(|| format!("cannot open dataset {}", path.display()))?;
    let mut dataset = parse_records(file, format)
        .with_context(|| format!("failed to parse {}", path.display()))?;
    dataset.set_source(path.display().to_string());
    Ok(dataset)
}

fn build_registry(grader_endpoint: Option<&str>) -> Result<MetricRegistry> {
    let mut registry = MetricRegistry::with_builtins();
    if let Some(endpoint) = grader_endpoint {
        registry.register_external(ExternalGraderConfig::new(
            MetricId::External(GRADER_METRIC_NAME.to_string()),
            endpoint,
            GRADER_TIMEOUT,
            GRADER_MAX_RETRIES,
        )?);
    }
    Ok(registry)
}

fn parse_metric_list(spec: Option<&str>, registry: &MetricRegistry) -> Result<Vec<MetricId>> {
    match spec {
        None => Ok(registry.ids()),
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Ok(s.parse::<MetricId>()?))
            .collect(),
    }
}

fn load_routing(
    path: Option<&Path>,
    registry: &MetricRegistry,
) -> Result<(RoutingTable, ClassifierConfig, String)> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read routing config {}", path.display()))?;
            let (table, classifier) = load_routing_config(&text, registry)
                .with_context(|| format!("invalid routing config {}", path.display()))?;
            Ok((table, classifier, text))
        }
        None => {
            let table = if registry.has_external() {
                default_routing_table_with_grader(MetricId::External(
                    GRADER_METRIC_NAME.to_string(),
                ))?
            } else {
                default_routing_table()
            };
            Ok((table, ClassifierConfig::default(), "default".to_string()))
        }
    }
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
}

/// Column pairs over rows where both the metric and human values exist.
fn paired_with_human(matrix: &ScoreMatrix, column: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (cell, human) in matrix
        .column_values(column)
        .iter()
        .zip(matrix.human_values())
    {
        if let (Some(x), Some(y)) = (cell, human) {
            xs.push(*x);
            ys.push(y);
        }
    }
    (xs, ys)
}

fn global_mean_deltas(matrix: &ScoreMatrix) -> Result<BTreeMap<String, Option<f64>>> {
    let mut deltas = BTreeMap::new();
    for (column, id) in matrix.metric_ids().iter().enumerate() {
        let (xs, ys) = paired_with_human(matrix, column);
        let delta = if xs.is_empty() {
            None
        } else {
            Some(mean_score_delta(&xs, &ys)?)
        };
        deltas.insert(id.name().to_string(), delta);
    }
    Ok(deltas)
}

fn human_skip_list(dataset: &Dataset) -> Vec<SkippedRecord> {
    dataset
        .records()
        .iter()
        .filter(|r| r.human_score.is_none())
        .map(|r| SkippedRecord {
            record_id: r.id.clone(),
            reason: "no human_score; excluded from agreement statistics".to_string(),
        })
        .collect()
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let dataset = load_dataset(&args.dataset, args.format)?;
    let registry = build_registry(args.grader_endpoint.as_deref())?;
    let metric_ids = parse_metric_list(args.metrics.as_deref(), &registry)?;
    let ctx = MetricContext {
        random_seed: args.seed,
        ..MetricContext::default()
    };

    let matrix = evaluate_all(&dataset, &metric_ids, &registry, &ctx)?;
    write_matrix_csv(&args.out.join("scores.csv"), &matrix)?;

    let hash = config_hash(&[
        ("command", "evaluate"),
        ("dataset", &args.dataset.display().to_string()),
        ("metrics", &join_ids(&metric_ids)),
        (
            "grader_endpoint",
            args.grader_endpoint.as_deref().unwrap_or(""),
        ),
        ("seed", &args.seed.to_string()),
        ("strict", &args.strict.to_string()),
    ]);
    let mut report = RunReport::new("evaluate", hash, dataset.source());
    report.record_count = dataset.len();
    report.scored_count = dataset.len();
    report.summary = Some(summarize(&dataset));
    report.metrics = metric_ids.iter().map(|m| m.name().to_string()).collect();
    report.score_matrix_file = Some("scores.csv".to_string());
    report.failures = matrix.failures().to_vec();
    report.write(&args.out.join("report.json"))?;

    for failure in matrix.failures() {
        eprintln!(
            "warning: {} on record {}: {}",
            failure.metric_id, failure.record_id, failure.reason
        );
    }
    if args.strict && !matrix.failures().is_empty() {
        bail!(
            "{} grader cell(s) failed (strict mode)",
            matrix.failures().len()
        );
    }
    println!(
        "evaluated {} records x {} metrics -> {}",
        dataset.len(),
        metric_ids.len(),
        args.out.join("scores.csv").display()
    );
    Ok(())
}

/// Returns the dataset with every record typed: trusted labels kept,
/// unlabeled records classified. Also reports how many were classified.
fn fill_answer_types(dataset: &Dataset, classifier: &ClassifierConfig) -> Result<(Dataset, usize)> {
    let mut records = dataset.records().to_vec();
    let mut classified = 0;
    for record in &mut records {
        if record.answer_type.is_none() {
            let gold = record
                .gold_answers
                .first()
                .expect("validated records have golds");
            record.answer_type =
                Some(classify_with(&record.question, gold, classifier)?.answer_type);
            classified += 1;
        }
    }
    Ok((
        Dataset::from_records(records, dataset.source())?,
        classified,
    ))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let methods = args.method.methods();

    let registry = build_registry(args.grader_endpoint.as_deref())?;
    let (_, classifier, routing_text) = load_routing(args.routing.as_deref(), &registry)?;

    let (matrix, dataset, classified_count) = match (&args.dataset, &args.matrix) {
        (Some(path), None) => {
            let dataset = load_dataset(path, args.format)?;
            let (typed, classified_count) = fill_answer_types(&dataset, &classifier)?;
            let metric_ids = parse_metric_list(args.metrics.as_deref(), &registry)?;
            let ctx = MetricContext {
                random_seed: args.seed,
                ..MetricContext::default()
            };
            let matrix = evaluate_all(&typed, &metric_ids, &registry, &ctx)?;
            write_matrix_csv(&args.out.join("scores.csv"), &matrix)?;
            (matrix, Some(typed), classified_count)
        }
        (None, Some(path)) => (crate::report::read_matrix_csv(path)?, None, 0),
        _ => bail!("analyze needs exactly one of --dataset or --matrix"),
    };

    if !matrix.has_human_scores() {
        bail!("this analysis requires the human score column, and no record carries human_score");
    }

    // Correlation matrices, one file per method.
    for method in &methods {
        let correlations = correlation_matrix(&matrix, *method)?;
        write_correlation_csv(
            &args.out.join(format!("correlation_{}.csv", method.name())),
            &correlations,
        )?;
    }

    // Per-type breakdowns need the typed dataset.
    let breakdowns: Vec<TypedBreakdown> = match &dataset {
        Some(dataset) => methods
            .iter()
            .map(|m| per_type_analysis(dataset, &matrix, *m, args.bins, DEFAULT_MIN_SUPPORT))
            .collect::<qa_eval_core::Result<_>>()?,
        None => Vec::new(),
    };
    if !breakdowns.is_empty() {
        write_per_type_csv(&args.out.join("per_type_breakdown.csv"), &breakdowns)?;
    }

    // Mean-delta table: global rows, then per type when available.
    let global_deltas = global_mean_deltas(&matrix)?;
    let mut delta_rows: Vec<MeanDeltaRow> = Vec::new();
    for (column, id) in matrix.metric_ids().iter().enumerate() {
        let (xs, _) = paired_with_human(&matrix, column);
        delta_rows.push(MeanDeltaRow {
            scope: "global".to_string(),
            metric: id.name().to_string(),
            mean_delta: global_deltas[id.name()],
            scored_count: xs.len(),
            low_support: None,
        });
    }
    if let Some(breakdown) = breakdowns.first() {
        for (answer_type, entry) in &breakdown.entries {
            for (metric, delta) in &entry.mean_deltas {
                delta_rows.push(MeanDeltaRow {
                    scope: answer_type.label().to_string(),
                    metric: metric.name().to_string(),
                    mean_delta: *delta,
                    scored_count: entry.scored_count,
                    low_support: Some(entry.low_support),
                });
            }
        }
    }
    write_mean_delta_csv(&args.out.join("mean_delta.csv"), &delta_rows)?;

    // Histograms: every metric column plus human globally; per-type human
    // distributions when the dataset is available.
    let mut series = Vec::new();
    for (column, id) in matrix.metric_ids().iter().enumerate() {
        let values: Vec<f64> = matrix.column_values(column).into_iter().flatten().collect();
        series.push(HistogramSeries {
            series: id.name().to_string(),
            scope: "global".to_string(),
            bins: histogram(&values, args.bins)?,
        });
    }
    let human_values: Vec<f64> = matrix.human_values().into_iter().flatten().collect();
    series.push(HistogramSeries {
        series: "human".to_string(),
        scope: "global".to_string(),
        bins: histogram(&human_values, args.bins)?,
    });
    if let Some(breakdown) = breakdowns.first() {
        for (answer_type, entry) in &breakdown.entries {
            series.push(HistogramSeries {
                series: "human".to_string(),
                scope: answer_type.label().to_string(),
                bins: entry.human_histogram.clone(),
            });
        }
    }
    write_histograms_csv(&args.out.join("histograms.csv"), &series)?;

    let hash = config_hash(&[
        ("command", "analyze"),
        (
            "input",
            &args
                .dataset
                .as_ref()
                .or(args.matrix.as_ref())
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        ),
        ("method", args.method.name()),
        ("bins", &args.bins.to_string()),
        ("metrics", args.metrics.as_deref().unwrap_or("default")),
        ("routing", &routing_text),
        ("seed", &args.seed.to_string()),
    ]);
    let source = dataset
        .as_ref()
        .map(|d| d.source().to_string())
        .or_else(|| args.matrix.as_ref().map(|p| p.display().to_string()))
        .unwrap_or_default();
    let mut report = RunReport::new("analyze", hash, &source);
    report.record_count = matrix.record_count();
    report.scored_count = matrix.human_values().iter().filter(|v| v.is_some()).count();
    report.summary = dataset.as_ref().map(summarize);
    report.metrics = matrix
        .metric_ids()
        .iter()
        .map(|m| m.name().to_string())
        .collect();
    report.correlation_methods = Some(methods.iter().map(|m| m.name().to_string()).collect());
    report.mean_delta_global = Some(global_deltas);
    report.failures = matrix.failures().to_vec();
    if let Some(dataset) = &dataset {
        report.skipped_records = human_skip_list(dataset);
    }
    if classified_count > 0 {
        eprintln!(
            "note: classified {classified_count} unlabeled record(s) for the per-type analysis"
        );
    }
    report.write(&args.out.join("report.json"))?;

    if args.strict && !matrix.failures().is_empty() {
        bail!(
            "{} grader cell(s) failed (strict mode)",
            matrix.failures().len()
        );
    }
    println!(
        "analyzed {} records ({} with human scores) -> {}",
        matrix.record_count(),
        report.scored_count,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let dataset = load_dataset(&args.dataset, args.format)?;
    let registry = MetricRegistry::with_builtins();
    let (_, classifier, routing_text) = load_routing(args.routing.as_deref(), &registry)?;

    let mut rows = Vec::with_capacity(dataset.len());
    let mut agreement: BTreeMap<(AnswerType, AnswerType), usize> = BTreeMap::new();
    let mut labeled = 0usize;
    let mut matched = 0usize;
    for record in dataset.records() {
        let gold = record
            .gold_answers
            .first()
            .expect("validated records have golds");
        let classification = classify_with(&record.question, gold, &classifier)?;
        if let Some(given) = record.answer_type {
            labeled += 1;
            if given == classification.answer_type {
                matched += 1;
            }
            *agreement
                .entry((given, classification.answer_type))
                .or_insert(0) += 1;
        }
        rows.push(ClassificationRow {
            record_id: record.id.clone(),
            given_type: record.answer_type.map(|t| t.label().to_string()),
            classified_type: classification.answer_type.label().to_string(),
            fired_rule: classification.fired_rule.to_string(),
        });
    }
    write_classifications_csv(&args.out.join("classifications.csv"), &rows)?;

    let rate = if labeled > 0 {
        let rate = matched as f64 / labeled as f64;
        println!("agreement rate: {} ({matched}/{labeled})", fmt_score(rate));
        print_agreement_matrix(&agreement);
        Some(rate)
    } else {
        println!("no given labels; classified {} record(s)", dataset.len());
        None
    };

    let hash = config_hash(&[
        ("command", "classify"),
        ("dataset", &args.dataset.display().to_string()),
        ("routing", &routing_text),
    ]);
    let mut report = RunReport::new("classify", hash, dataset.source());
    report.record_count = dataset.len();
    report.scored_count = dataset.len();
    report.summary = Some(summarize(&dataset));
    report.classifier_agreement = rate;
    report.write(&args.out.join("report.json"))?;
    Ok(())
}

fn print_agreement_matrix(agreement: &BTreeMap<(AnswerType, AnswerType), usize>) {
    let mut given_types: Vec<AnswerType> = agreement.keys().map(|(g, _)| *g).collect();
    given_types.dedup();
    let mut classified_types: Vec<AnswerType> = agreement.keys().map(|(_, c)| *c).collect();
    classified_types.sort();
    classified_types.dedup();

    print!("{:<18}", "given\\classified");
    for c in &classified_types {
        print!("{:>18}", c.label());
    }
    println!();
    for g in &given_types {
        print!("{:<18}", g.label());
        for c in &classified_types {
            print!("{:>18}", agreement.get(&(*g, *c)).copied().unwrap_or(0));
        }
        println!();
    }
}

pub fn cmd_route(args: &RouteArgs) -> Result<()> {
    if args.dump_config {
        println!("{}", default_routing_config_json());
        return Ok(());
    }
    let dataset_path = args
        .dataset
        .as_ref()
        .expect("clap requires --dataset without --dump-config");

    ensure_out_dir(&args.out)?;
    let mut dataset = load_dataset(dataset_path, args.format)?;
    if args.reclassify {
        let mut records = dataset.records().to_vec();
        for record in &mut records {
            record.answer_type = None;
        }
        let source = dataset.source().to_string();
        dataset = Dataset::from_records(records, source)?;
    }
    let registry = build_registry(args.grader_endpoint.as_deref())?;
    let (table, classifier, routing_text) = load_routing(args.routing.as_deref(), &registry)?;
    let ctx = MetricContext {
        random_seed: args.seed,
        ..MetricContext::default()
    };

    let routed = route_dataset(&dataset, &table, &registry, &ctx, &classifier)?;

    let mut rows = Vec::with_capacity(routed.len());
    let mut routing_report = RoutingReport::default();
    for (record, outcome) in dataset.records().iter().zip(&routed) {
        *routing_report
            .per_type_counts
            .entry(outcome.answer_type.label().to_string())
            .or_insert(0) += 1;
        *routing_report
            .per_metric_counts
            .entry(outcome.metric_used.name().to_string())
            .or_insert(0) += 1;
        if outcome.fallback_used {
            routing_report.fallback_count += 1;
        }
        rows.push(RoutedRow {
            record_id: record.id.clone(),
            answer_type: outcome.answer_type.label().to_string(),
            metric_used: outcome.metric_used.name().to_string(),
            score: outcome.score.value(),
            fallback_used: outcome.fallback_used,
            fired_rule: outcome.fired_rule.clone(),
        });
    }
    routing_report.fallback_rate = routing_report.fallback_count as f64 / routed.len() as f64;
    write_routed_csv(&args.out.join("routed_scores.csv"), &rows)?;

    let trusted = routed
        .iter()
        .filter(|r| r.fired_rule == TRUSTED_LABEL_RULE)
        .count();
    let fallback_count = routing_report.fallback_count;

    let hash = config_hash(&[
        ("command", "route"),
        ("dataset", &dataset_path.display().to_string()),
        ("routing", &routing_text),
        (
            "grader_endpoint",
            args.grader_endpoint.as_deref().unwrap_or(""),
        ),
        ("seed", &args.seed.to_string()),
        ("reclassify", &args.reclassify.to_string()),
    ]);
    let mut report = RunReport::new("route", hash, dataset.source());
    report.record_count = dataset.len();
    report.scored_count = routed.len();
    report.summary = Some(summarize(&dataset));
    report.metrics = table
        .routes()
        .values()
        .map(|m| m.name().to_string())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    report.routing = Some(routing_report);
    report.write(&args.out.join("report.json"))?;

    println!(
        "routed {} records ({} trusted labels, {} fallbacks) -> {}",
        routed.len(),
        trusted,
        fallback_count,
        args.out.join("routed_scores.csv").display()
    );
    if args.strict && fallback_count > 0 {
        bail!("{fallback_count} record(s) needed the fallback metric (strict mode)");
    }
    Ok(())
}

fn join_ids(ids: &[MetricId]) -> String {
    ids.iter()
        .map(|m| m.name().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

//! Type-routed grading: classify each (question, gold answer) pair into one
//! of the 16 answer types, then route it to the metric configured for that
//! type. Scores come back with full provenance (type, metric, fired rule,
//! whether the fallback was used).
//!
//! The classifier is a deterministic rule ladder evaluated in priority
//! order; the first matching rule wins and a terminal rule guarantees
//! totality. All thresholds live in [`ClassifierConfig`] and can be tuned
//! through the routing config document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{AnswerType, Dataset, QARecord, Score};
use crate::error::{Error, Result};
use crate::exec;
use crate::metrics::{MetricContext, MetricId, MetricRegistry};
use crate::text::{normalize, tokenize, NormalizationConfig};

/// Thresholds for the structural classifier rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Minimum share of code punctuation (`;{}()=<>[]`) among non-whitespace
    /// characters for multi-line text to count as code.
    pub code_punct_density: f64,
    pub code_min_lines: usize,
    pub list_min_marked_lines: usize,
    pub list_min_items: usize,
    pub list_item_max_tokens: usize,
    pub name_max_tokens: usize,
    pub phrase_max_tokens: usize,
    pub sentence_max_tokens: usize,
    pub short_paragraph_max_sentences: usize,
    pub paragraph_max_sentences: usize,
    pub long_paragraph_max_sentences: usize,
    pub essay_min_sentences: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            code_punct_density: 0.15,
            code_min_lines: 2,
            list_min_marked_lines: 2,
            list_min_items: 3,
            list_item_max_tokens: 4,
            name_max_tokens: 4,
            phrase_max_tokens: 5,
            sentence_max_tokens: 30,
            short_paragraph_max_sentences: 3,
            paragraph_max_sentences: 6,
            long_paragraph_max_sentences: 12,
            essay_min_sentences: 13,
        }
    }
}

/// A classification outcome: the type plus the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub answer_type: AnswerType,
    pub fired_rule: &'static str,
}

/// Rule id reported when a record's own `answer_type` label was trusted
/// instead of running the classifier.
pub const TRUSTED_LABEL_RULE: &str = "trusted_label";

/// Classifies under the default thresholds.
///
/// The gold answer is inspected raw (classification needs case and
/// punctuation); the question text is available to the rules but the default
/// ladder keys entirely off the gold.
pub fn classify_answer_type(question: &str, gold: &str) -> Result<Classification> {
    classify_with(question, gold, &ClassifierConfig::default())
}

/// Classifies with explicit thresholds. Deterministic and total: every
/// nonempty gold maps to exactly one type.
pub fn classify_with(
    _question: &str,
    gold: &str,
    config: &ClassifierConfig,
) -> Result<Classification> {
    let trimmed = gold.trim();
    if trimmed.is_empty() {
        return Err(Error::EmptyGold);
    }

    let classified = |answer_type, fired_rule| {
        Ok(Classification {
            answer_type,
            fired_rule,
        })
    };

    let normalized = normalize(trimmed, &NormalizationConfig::default());
    if matches!(normalized.as_str(), "yes" | "no" | "true" | "false") {
        return classified(AnswerType::Boolean, "boolean");
    }

    let mut scalars = trimmed.chars();
    if let (Some(c), None) = (scalars.next(), scalars.next()) {
        if c.is_alphanumeric() {
            return classified(AnswerType::SingleCharacter, "single_character");
        }
    }

    let raw_tokens: Vec<&str> = trimmed.split_whitespace().collect();
    if raw_tokens.len() == 1 && trimmed.chars().all(|c| !c.is_alphanumeric()) {
        return classified(AnswerType::Symbol, "symbol");
    }

    if is_numeric_answer(trimmed) {
        return classified(AnswerType::Numerical, "numerical");
    }

    if looks_like_code(trimmed, config) {
        return classified(AnswerType::CodeSnippet, "code_snippet");
    }

    if is_equation(trimmed) {
        return classified(AnswerType::Equation, "equation");
    }

    if is_formula(trimmed) {
        return classified(AnswerType::Formula, "formula");
    }

    if is_list(trimmed, config) {
        return classified(AnswerType::List, "list");
    }

    let ends_sentence = trimmed.ends_with(['.', '!', '?']);
    if !ends_sentence
        && !raw_tokens.is_empty()
        && raw_tokens.len() <= config.name_max_tokens
        && raw_tokens.iter().all(|t| is_capitalized(t))
    {
        return classified(AnswerType::Name, "name");
    }

    let normalized_tokens = tokenize(&normalized).len();
    if normalized_tokens == 1 {
        return classified(AnswerType::SingleWord, "single_word");
    }

    if !ends_sentence && (2..=config.phrase_max_tokens).contains(&normalized_tokens) {
        return classified(AnswerType::Phrase, "phrase");
    }

    let sentences = sentence_count(trimmed);
    if sentences == 1 && normalized_tokens <= config.sentence_max_tokens {
        return classified(AnswerType::Sentence, "sentence");
    }
    if (2..=config.short_paragraph_max_sentences).contains(&sentences) {
        return classified(AnswerType::ShortParagraph, "short_paragraph");
    }
    if (config.short_paragraph_max_sentences + 1..=config.paragraph_max_sentences)
        .contains(&sentences)
    {
        return classified(AnswerType::Paragraph, "paragraph");
    }
    if (config.paragraph_max_sentences + 1..=config.long_paragraph_max_sentences)
        .contains(&sentences)
    {
        return classified(AnswerType::LongParagraph, "long_paragraph");
    }
    if sentences >= config.essay_min_sentences {
        return classified(AnswerType::Essay, "essay");
    }
    // Residue: a single sentence too long for the sentence rule.
    classified(AnswerType::Paragraph, "terminal_paragraph")
}

fn is_capitalized(token: &str) -> bool {
    token
        .chars()
        .find(|c| c.is_alphabetic())
        .is_some_and(|c| c.is_uppercase())
}

/// Integer or decimal with optional sign, percent suffix, and comma
/// thousands separators.
fn is_numeric_answer(text: &str) -> bool {
    let text = text.strip_suffix('%').unwrap_or(text).trim_end();
    let text = text
        .strip_prefix('+')
        .or_else(|| text.strip_prefix('-'))
        .unwrap_or(text);
    if text.is_empty() {
        return false;
    }
    let (integer, fraction) = match text.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (text, None),
    };
    if let Some(f) = fraction {
        if f.is_empty() || !f.chars().all(|c| c.is_ascii_digit()) {
            return false;
        }
    }
    if integer.is_empty() {
        return fraction.is_some();
    }
    if integer.contains(',') {
        let mut groups = integer.split(',');
        let head = groups.next().unwrap_or_default();
        if head.is_empty() || head.len() > 3 || !head.chars().all(|c| c.is_ascii_digit()) {
            return false;
        }
        groups.all(|g| g.len() == 3 && g.chars().all(|c| c.is_ascii_digit()))
    } else {
        integer.chars().all(|c| c.is_ascii_digit())
    }
}

const CODE_PUNCTUATION: [char; 10] = [';', '{', '}', '(', ')', '=', '<', '>', '[', ']'];

fn looks_like_code(text: &str, config: &ClassifierConfig) -> bool {
    if text.contains("```") {
        return true;
    }
    if text.lines().count() < config.code_min_lines {
        return false;
    }
    let non_space = text.chars().filter(|c| !c.is_whitespace()).count();
    if non_space == 0 {
        return false;
    }
    let code_chars = text
        .chars()
        .filter(|c| CODE_PUNCTUATION.contains(c))
        .count();
    code_chars as f64 / non_space as f64 >= config.code_punct_density
}

fn is_equation(text: &str) -> bool {
    if text.contains("\\(") || text.contains("\\[") || text.matches('$').count() >= 2 {
        return true;
    }
    text.match_indices('=').any(|(index, _)| {
        let before = &text[..index];
        let after = &text[index + 1..];
        let is_operand = |s: &str| s.chars().any(|c| !c.is_whitespace() && c != '=');
        is_operand(before) && is_operand(after)
    })
}

const MATH_OPERATORS: [char; 7] = ['+', '*', '/', '^', '×', '÷', '√'];

fn is_formula(text: &str) -> bool {
    if text.contains('=') {
        return false;
    }
    let has_alphanumeric = text.chars().any(char::is_alphanumeric);
    let has_digit = text.chars().any(|c| c.is_ascii_digit());
    let has_operator =
        text.chars().any(|c| MATH_OPERATORS.contains(&c)) || (has_digit && text.contains('-'));
    (has_operator && has_alphanumeric) || is_chemical_formula(text)
}

/// Single token shaped like element groups (`H2O`, `C6H12O6`): uppercase
/// letter, optional lowercase, optional digits — with at least one digit.
fn is_chemical_formula(text: &str) -> bool {
    if text.split_whitespace().count() != 1 || !text.chars().any(|c| c.is_ascii_digit()) {
        return false;
    }
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if !c.is_ascii_uppercase() {
            return false;
        }
        if chars.peek().is_some_and(|c| c.is_ascii_lowercase()) {
            chars.next();
        }
        while chars.peek().is_some_and(|c| c.is_ascii_digit()) {
            chars.next();
        }
    }
    true
}

fn is_list(text: &str, config: &ClassifierConfig) -> bool {
    let marked_lines = text
        .lines()
        .filter(|line| is_list_marked(line.trim_start()))
        .count();
    if marked_lines >= config.list_min_marked_lines {
        return true;
    }
    let items: Vec<&str> = text
        .split([',', ';'])
        .map(str::trim)
        .filter(|item| !item.is_empty())
        .collect();
    items.len() >= config.list_min_items
        && items
            .iter()
            .all(|item| item.split_whitespace().count() <= config.list_item_max_tokens)
}

fn is_list_marked(line: &str) -> bool {
    if line.starts_with(['-', '*', '•']) {
        return true;
    }
    let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return false;
    }
    line[digits.len()..].starts_with(['.', ')'])
}

/// Sentences are segments ended by a run of `.!?` followed by whitespace or
/// end of text; a trailing unterminated segment with content counts as one.
fn sentence_count(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut has_content = false;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j], '.' | '!' | '?') {
                j += 1;
            }
            if (j >= chars.len() || chars[j].is_whitespace()) && has_content {
                count += 1;
                has_content = false;
            }
            i = j;
        } else {
            if chars[i].is_alphanumeric() {
                has_content = true;
            }
            i += 1;
        }
    }
    if has_content {
        count += 1;
    }
    count
}

/// Total map from answer type to metric, with a built-in fallback used when
/// the routed metric fails at runtime (e.g. grader offline).
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable {
    route: BTreeMap<AnswerType, MetricId>,
    fallback: MetricId,
}

const SHORT_FORMS: [AnswerType; 8] = [
    AnswerType::SingleWord,
    AnswerType::Numerical,
    AnswerType::Name,
    AnswerType::List,
    AnswerType::Formula,
    AnswerType::Boolean,
    AnswerType::SingleCharacter,
    AnswerType::Symbol,
];
const MID_FORMS: [AnswerType; 2] = [AnswerType::Phrase, AnswerType::Sentence];
const LONG_FORMS: [AnswerType; 4] = [
    AnswerType::ShortParagraph,
    AnswerType::Paragraph,
    AnswerType::LongParagraph,
    AnswerType::Essay,
];
const STRUCTURAL_FORMS: [AnswerType; 2] = [AnswerType::Equation, AnswerType::CodeSnippet];

impl RoutingTable {
    /// Validates totality over the 16 types and that the fallback is a
    /// built-in metric.
    pub fn new(route: BTreeMap<AnswerType, MetricId>, fallback: MetricId) -> Result<Self> {
        let missing: Vec<&str> = AnswerType::ALL
            .iter()
            .filter(|t| !route.contains_key(t))
            .map(|t| t.label())
            .collect();
        if !missing.is_empty() {
            return Err(Error::RoutingTableIncomplete(missing.join(", ")));
        }
        if !fallback.is_builtin() {
            return Err(Error::NonBuiltinFallback(fallback.name().to_string()));
        }
        Ok(RoutingTable { route, fallback })
    }

    pub fn route_for(&self, answer_type: AnswerType) -> &MetricId {
        &self.route[&answer_type]
    }

    pub fn fallback(&self) -> &MetricId {
        &self.fallback
    }

    pub fn routes(&self) -> &BTreeMap<AnswerType, MetricId> {
        &self.route
    }
}

/// The built-in default: exact match for short forms, token F1 for phrases
/// and sentences, ROUGE-L for the paragraph-to-essay range, Levenshtein
/// similarity for equations and code. Fallback: token F1.
pub fn default_routing_table() -> RoutingTable {
    build_default_table(None).expect("default table is total")
}

/// Default routes with long forms pointed at a learned grader instead of
/// ROUGE-L. The fallback becomes ROUGE-L, so long forms degrade to the
/// built-in long-form metric when the grader is offline.
pub fn default_routing_table_with_grader(grader: MetricId) -> Result<RoutingTable> {
    build_default_table(Some(grader))
}

fn build_default_table(grader: Option<MetricId>) -> Result<RoutingTable> {
    let mut route = BTreeMap::new();
    for t in SHORT_FORMS {
        route.insert(t, MetricId::ExactMatch);
    }
    for t in MID_FORMS {
        route.insert(t, MetricId::TokenF1);
    }
    let long_form_metric = grader.clone().unwrap_or(MetricId::RougeL);
    for t in LONG_FORMS {
        route.insert(t, long_form_metric.clone());
    }
    for t in STRUCTURAL_FORMS {
        route.insert(t, MetricId::Levenshtein);
    }
    let fallback = if grader.is_some() {
        MetricId::RougeL
    } else {
        MetricId::TokenF1
    };
    RoutingTable::new(route, fallback)
}

/// A routed score with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedScore {
    pub score: Score,
    pub answer_type: AnswerType,
    pub metric_used: MetricId,
    pub fired_rule: String,
    pub fallback_used: bool,
}

/// Scores one record through the routing table.
///
/// A trusted `answer_type` label wins over classification. When the routed
/// metric fails (external grader offline or misbehaving), the table's
/// fallback metric is used and flagged.
pub fn route_score(
    record: &QARecord,
    table: &RoutingTable,
    registry: &MetricRegistry,
    ctx: &MetricContext,
    classifier: &ClassifierConfig,
) -> Result<RoutedScore> {
    let (answer_type, fired_rule) = match record.answer_type {
        Some(t) => (t, TRUSTED_LABEL_RULE),
        None => {
            let gold = record.gold_answers.first().ok_or(Error::NoGoldAnswers)?;
            let c = classify_with(&record.question, gold, classifier)?;
            (c.answer_type, c.fired_rule)
        }
    };

    let routed = table.route_for(answer_type);
    match registry.score(routed, record, ctx) {
        Ok(score) => Ok(RoutedScore {
            score,
            answer_type,
            metric_used: routed.clone(),
            fired_rule: fired_rule.to_string(),
            fallback_used: false,
        }),
        Err(Error::GraderUnavailable { .. })
        | Err(Error::GraderProtocol(_))
        | Err(Error::UnknownMetric(_)) => {
            let fallback = table.fallback();
            let score = registry.score(fallback, record, ctx)?;
            Ok(RoutedScore {
                score,
                answer_type,
                metric_used: fallback.clone(),
                fired_rule: fired_rule.to_string(),
                fallback_used: true,
            })
        }
        Err(other) => Err(other),
    }
}

/// Routes every record; parallel when the `parallel` feature is on. Record
/// order is preserved.
pub fn route_dataset(
    dataset: &Dataset,
    table: &RoutingTable,
    registry: &MetricRegistry,
    ctx: &MetricContext,
    classifier: &ClassifierConfig,
) -> Result<Vec<RoutedScore>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut effective = ctx.clone();
    let needs_tfidf = table
        .routes()
        .values()
        .chain(std::iter::once(table.fallback()))
        .any(|m| *m == MetricId::TfidfCosine);
    if needs_tfidf && effective.tfidf_model.is_none() {
        effective.tfidf_model = Some(std::sync::Arc::new(crate::metrics::fit_dataset_tfidf(
            dataset, ctx,
        )?));
    }
    let ctx = &effective;
    exec::map_indexed(dataset.records(), |_, record| {
        route_score(record, table, registry, ctx, classifier)
    })
    .into_iter()
    .collect()
}

/// The routing config document: routes, fallback, classifier thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingConfig {
    pub routes: BTreeMap<String, String>,
    pub fallback: String,
    #[serde(default)]
    pub classifier: ClassifierConfig,
}

impl RoutingConfig {
    pub fn from_table(table: &RoutingTable, classifier: ClassifierConfig) -> Self {
        RoutingConfig {
            routes: table
                .routes()
                .iter()
                .map(|(t, m)| (t.label().to_string(), m.name().to_string()))
                .collect(),
            fallback: table.fallback().name().to_string(),
            classifier,
        }
    }
}

/// Parses and validates a routing config document. Unknown type keys,
/// missing types, and metric ids absent from the registry are all rejected
/// with the offending names.
pub fn load_routing_config(
    text: &str,
    registry: &MetricRegistry,
) -> Result<(RoutingTable, ClassifierConfig)> {
    let config: RoutingConfig =
        serde_json::from_str(text).map_err(|e| Error::InvalidRoutingConfig(e.to_string()))?;

    let mut route = BTreeMap::new();
    for (type_label, metric_name) in &config.routes {
        let answer_type: AnswerType = type_label
            .parse()
            .map_err(|_| Error::InvalidRoutingConfig(format!("unknown type key `{type_label}`")))?;
        let metric: MetricId = metric_name.parse()?;
        if !registry.contains(&metric) {
            return Err(Error::UnknownRoutingMetric(metric_name.clone()));
        }
        route.insert(answer_type, metric);
    }
    let fallback: MetricId = config.fallback.parse()?;
    if !registry.contains(&fallback) {
        return Err(Error::UnknownRoutingMetric(config.fallback.clone()));
    }
    let table = RoutingTable::new(route, fallback)?;
    Ok((table, config.classifier))
}

/// The default config as a pretty JSON document (what `--dump-config`
/// prints).
pub fn default_routing_config_json() -> String {
    let config = RoutingConfig::from_table(&default_routing_table(), ClassifierConfig::default());
    serde_json::to_string_pretty(&config).expect("default config serializes")
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn classification_is_total_and_deterministic(gold in "\\PC{1,80}") {
            prop_assume!(!gold.trim().is_empty());
            let first = classify_answer_type("q", &gold).unwrap();
            let second = classify_answer_type("q", &gold).unwrap();
            prop_assert_eq!(&first, &second);
            prop_assert!(AnswerType::ALL.contains(&first.answer_type));
        }

        #[test]
        fn routed_metric_is_route_or_fallback(
            gold in "[a-zA-Z0-9 .,]{1,60}",
            attempt in "[a-zA-Z0-9 .,]{0,60}",
        ) {
            prop_assume!(!gold.trim().is_empty());
            let record = QARecord::new("r0", "q", vec![gold], attempt).unwrap();
            let table = default_routing_table();
            let registry = MetricRegistry::with_builtins();
            let routed = route_score(
                &record,
                &table,
                &registry,
                &MetricContext::default(),
                &ClassifierConfig::default(),
            )
            .unwrap();
            let expected = table.route_for(routed.answer_type);
            if routed.fallback_used {
                prop_assert_eq!(&routed.metric_used, table.fallback());
            } else {
                prop_assert_eq!(&routed.metric_used, expected);
            }
        }
    }
}

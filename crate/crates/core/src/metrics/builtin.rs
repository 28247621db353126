//! Built-in lexical metrics.
//!
//! Every metric follows the same contract: given the gold answers and an
//! attempt, return a score in `[0, 1]` equal to the maximum per-gold score.
//! Normalization happens inside each metric through the context, so raw
//! record text stays available to callers that need case and punctuation.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::dataset::Score;
use crate::error::{Error, Result};
use crate::metrics::MetricContext;
use crate::text::{cosine_similarity, normalize, tokenize, vectorize, TokenSeq};

fn max_over_golds(golds: &[String], per_pair: impl Fn(&str) -> f64) -> Result<Score> {
    if golds.is_empty() {
        return Err(Error::NoGoldAnswers);
    }
    let best = golds
        .iter()
        .map(|gold| per_pair(gold))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(unit_score(best))
}

/// Clamps float noise at the interval boundary; the formulas themselves stay
/// inside `[0, 1]`.
fn unit_score(value: f64) -> Score {
    Score::new(value.clamp(0.0, 1.0)).expect("clamped value is a valid score")
}

/// 1 iff a normalized gold equals the normalized attempt.
pub fn exact_match(golds: &[String], attempt: &str, ctx: &MetricContext) -> Result<Score> {
    let attempt = normalize(attempt, &ctx.normalization);
    max_over_golds(golds, |gold| {
        if normalize(gold, &ctx.normalization) == attempt {
            1.0
        } else {
            0.0
        }
    })
}

/// Token-bag precision, recall, and their harmonic mean for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn token_bag(text: &str, ctx: &MetricContext) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for token in tokenize(&normalize(text, &ctx.normalization)).tokens() {
        *counts.entry(token.clone()).or_insert(0) += 1;
    }
    counts
}

fn bag_overlap(a: &HashMap<String, usize>, b: &HashMap<String, usize>) -> usize {
    a.iter()
        .map(|(token, &count)| count.min(b.get(token).copied().unwrap_or(0)))
        .sum()
}

fn bag_len(bag: &HashMap<String, usize>) -> usize {
    bag.values().sum()
}

/// Per-pair precision/recall/F1 over token bags under the context's
/// normalization. Both sides empty scores 1; exactly one side empty scores 0.
pub fn token_prf(gold: &str, attempt: &str, ctx: &MetricContext) -> PrecisionRecallF1 {
    let gold_bag = token_bag(gold, ctx);
    let attempt_bag = token_bag(attempt, ctx);
    let gold_len = bag_len(&gold_bag);
    let attempt_len = bag_len(&attempt_bag);
    if gold_len == 0 && attempt_len == 0 {
        return PrecisionRecallF1 {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    if gold_len == 0 || attempt_len == 0 {
        return PrecisionRecallF1 {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let overlap = bag_overlap(&gold_bag, &attempt_bag);
    let precision = overlap as f64 / attempt_len as f64;
    let recall = overlap as f64 / gold_len as f64;
    let f1 = if overlap == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrecisionRecallF1 {
        precision,
        recall,
        f1,
    }
}

/// Harmonic mean of token precision and recall, maximized over golds.
pub fn token_f1(golds: &[String], attempt: &str, ctx: &MetricContext) -> Result<Score> {
    max_over_golds(golds, |gold| token_prf(gold, attempt, ctx).f1)
}

/// Token recall alone: length-unpenalized coverage of the gold tokens.
pub fn token_recall(golds: &[String], attempt: &str, ctx: &MetricContext) -> Result<Score> {
    max_over_golds(golds, |gold| token_prf(gold, attempt, ctx).recall)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

fn pair_bleu(gold: &[String], attempt: &[String], ctx: &MetricContext) -> f64 {
    if attempt.is_empty() {
        return 0.0;
    }
    // Orders run 1..=min(max_n, attempt length); max_n below 1 means 1.
    let cap = ctx.bleu_max_n.min(attempt.len()).max(1);
    let mut log_sum = 0.0;
    for n in 1..=cap {
        let gold_counts = ngram_counts(gold, n);
        let attempt_counts = ngram_counts(attempt, n);
        let total: usize = attempt_counts.values().sum();
        let clipped: usize = attempt_counts
            .iter()
            .map(|(gram, &count)| count.min(gold_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if clipped == 0 {
            ctx.bleu_smoothing_floor.max(0.0)
        } else {
            clipped as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let geometric_mean = (log_sum / cap as f64).exp();
    let brevity_penalty = if !ctx.bleu_brevity_penalty || attempt.len() >= gold.len() {
        1.0
    } else {
        (1.0 - gold.len() as f64 / attempt.len() as f64).exp()
    };
    brevity_penalty * geometric_mean
}

/// Geometric mean of clipped n-gram precisions (orders 1..=`ctx.bleu_max_n`,
/// capped by the attempt length), smoothed at the context's floor, times a
/// brevity penalty unless disabled. An empty attempt scores 0.
pub fn bleu(golds: &[String], attempt: &str, ctx: &MetricContext) -> Result<Score> {
    let attempt_tokens = tokenize(&normalize(attempt, &ctx.normalization));
    max_over_golds(golds, |gold| {
        let gold_tokens = tokenize(&normalize(gold, &ctx.normalization));
        pair_bleu(gold_tokens.tokens(), attempt_tokens.tokens(), ctx)
    })
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut current = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            current[j + 1] = if x == y {
                prev[j] + 1
            } else {
                current[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Longest common subsequence length over token sequences.
pub fn lcs_length(a: &TokenSeq, b: &TokenSeq) -> usize {
    lcs_len(a.tokens(), b.tokens())
}

fn pair_rouge_l(gold: &[String], attempt: &[String]) -> f64 {
    if gold.is_empty() && attempt.is_empty() {
        return 1.0;
    }
    if gold.is_empty() || attempt.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(gold, attempt) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let recall = lcs / gold.len() as f64;
    let precision = lcs / attempt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// LCS-based F-measure (beta = 1) over token sequences.
pub fn rouge_l(golds: &[String], attempt: &str, ctx: &MetricContext) -> Result<Score> {
    let attempt_tokens = tokenize(&normalize(attempt, &ctx.normalization));
    max_over_golds(golds, |gold| {
        let gold_tokens = tokenize(&normalize(gold, &ctx.normalization));
        pair_rouge_l(gold_tokens.tokens(), attempt_tokens.tokens())
    })
}

/// Character-level Levenshtein distance with unit insert/delete/substitute
/// costs, over the texts exactly as given.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let previous = row[j + 1];
            row[j + 1] = (previous + 1)
                .min(row[j] + 1)
                .min(diagonal + if ca == cb { 0 } else { 1 });
            diagonal = previous;
        }
    }
    row[b.len()]
}

/// Levenshtein distance mapped into `[0, 1]`: `1 - d / max(len)` over the
/// normalized character strings; two empty strings score 1.
pub fn levenshtein_similarity(
    golds: &[String],
    attempt: &str,
    ctx: &MetricContext,
) -> Result<Score> {
    let attempt = normalize(attempt, &ctx.normalization);
    let attempt_len = attempt.chars().count();
    max_over_golds(golds, |gold| {
        let gold = normalize(gold, &ctx.normalization);
        let gold_len = gold.chars().count();
        let longest = gold_len.max(attempt_len);
        if longest == 0 {
            return 1.0;
        }
        1.0 - edit_distance(&gold, &attempt) as f64 / longest as f64
    })
}

/// Cosine similarity of TF-IDF vectors; requires a fitted model in the
/// context. A zero vector on either side scores 0.
pub fn tfidf_cosine(golds: &[String], attempt: &str, ctx: &MetricContext) -> Result<Score> {
    let model = ctx.tfidf_model.as_ref().ok_or(Error::MissingTfIdfModel)?;
    let attempt_vector = vectorize(model, &tokenize(&normalize(attempt, &ctx.normalization)));
    max_over_golds(golds, |gold| {
        let gold_vector = vectorize(model, &tokenize(&normalize(gold, &ctx.normalization)));
        cosine_similarity(&gold_vector, &attempt_vector)
    })
}

fn keyed_uniform(seed: u64, gold: &str, attempt: &str) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((gold.len() as u64).to_le_bytes());
    hasher.update(gold.as_bytes());
    hasher.update([0xff]);
    hasher.update(attempt.as_bytes());
    let digest = hasher.finalize();
    let bits = u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
    // 53 high-entropy bits -> uniform in [0, 1).
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic pseudo-random uniform score keyed by the seed and the pair
/// content. Same inputs always produce the same score; changing the seed
/// rekeys every pair.
pub fn random_baseline(golds: &[String], attempt: &str, ctx: &MetricContext) -> Result<Score> {
    max_over_golds(golds, |gold| keyed_uniform(ctx.random_seed, gold, attempt))
}



#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn all_metric_scores(golds: &[String], attempt: &str) -> Vec<f64> {
        use crate::text::fit_tfidf;
        let mut docs: Vec<TokenSeq> = golds
            .iter()
            .map(|g| tokenize(&normalize(g, &NormalizationConfig::default())))
            .collect();
        docs.push(tokenize(&normalize(
            attempt,
            &NormalizationConfig::default(),
        )));
        let model = fit_tfidf(&docs).unwrap();
        let ctx = MetricContext {
            tfidf_model: Some(std::sync::Arc::new(model)),
            ..MetricContext::default()
        };
        vec![
            exact_match(golds, attempt, &ctx).unwrap().value(),
            token_f1(golds, attempt, &ctx).unwrap().value(),
            token_recall(golds, attempt, &ctx).unwrap().value(),
            bleu(golds, attempt, &ctx).unwrap().value(),
            rouge_l(golds, attempt, &ctx).unwrap().value(),
            levenshtein_similarity(golds, attempt, &ctx)
                .unwrap()
                .value(),
            tfidf_cosine(golds, attempt, &ctx).unwrap().value(),
            random_baseline(golds, attempt, &ctx).unwrap().value(),
        ]
    }

    use crate::text::NormalizationConfig;

    proptest! {
        #[test]
        fn every_metric_stays_in_unit_interval(
            golds in proptest::collection::vec("\\PC{1,20}", 1..3),
            attempt in "\\PC{0,20}",
        ) {
            let golds: Vec<String> = golds.into_iter().filter(|g| !g.trim().is_empty()).collect();
            prop_assume!(!golds.is_empty());
            for score in all_metric_scores(&golds, &attempt) {
                prop_assert!((0.0..=1.0).contains(&score), "score {score} out of range");
            }
        }

        #[test]
        fn normalized_identity_maximizes_lexical_metrics(text in "[a-z]{1,12}( [a-z]{1,12}){0,5}") {
            let ctx = MetricContext::default();
            let golds = vec![text.clone()];
            prop_assume!(!normalize(&text, &ctx.normalization).is_empty());
            prop_assert_eq!(exact_match(&golds, &text, &ctx).unwrap().value(), 1.0);
            prop_assert_eq!(token_f1(&golds, &text, &ctx).unwrap().value(), 1.0);
            prop_assert_eq!(rouge_l(&golds, &text, &ctx).unwrap().value(), 1.0);
            prop_assert_eq!(levenshtein_similarity(&golds, &text, &ctx).unwrap().value(), 1.0);
        }

        #[test]
        fn f1_respects_harmonic_mean_bounds(gold in "[a-d ]{0,16}", attempt in "[a-d ]{0,16}") {
            let ctx = MetricContext::default();
            let prf = token_prf(&gold, &attempt, &ctx);
            prop_assert!(prf.f1 <= prf.precision.max(prf.recall) + 1e-12);
            prop_assert!(prf.f1 <= 1.0);
            if prf.precision <= prf.recall {
                prop_assert!(prf.f1 <= prf.recall + 1e-12);
            }
        }

        #[test]
        fn f1_matches_naive_multiset_counting(gold in "[b-d ]{0,14}", attempt in "[b-d ]{0,14}") {
            let ctx = MetricContext::default();
            let gold_tokens: Vec<&str> = gold.split_whitespace().collect();
            let attempt_tokens: Vec<&str> = attempt.split_whitespace().collect();
            // Naive counting: for each attempt token, consume one matching
            // gold token if any remains.
            let mut remaining = gold_tokens.clone();
            let mut overlap = 0usize;
            for token in &attempt_tokens {
                if let Some(pos) = remaining.iter().position(|g| g == token) {
                    remaining.remove(pos);
                    overlap += 1;
                }
            }
            let expected = if gold_tokens.is_empty() && attempt_tokens.is_empty() {
                1.0
            } else if gold_tokens.is_empty() || attempt_tokens.is_empty() || overlap == 0 {
                0.0
            } else {
                let p = overlap as f64 / attempt_tokens.len() as f64;
                let r = overlap as f64 / gold_tokens.len() as f64;
                2.0 * p * r / (p + r)
            };
            let prf = token_prf(&gold, &attempt, &ctx);
            prop_assert!((prf.f1 - expected).abs() < 1e-12);
        }

        #[test]
        fn edit_distance_and_lcs_are_symmetric(a in "[a-d]{0,8}", b in "[a-d]{0,8}") {
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            let sa = tokenize(&a.chars().map(|c| format!("{c} ")).collect::<String>());
            let sb = tokenize(&b.chars().map(|c| format!("{c} ")).collect::<String>());
            prop_assert_eq!(lcs_length(&sa, &sb), lcs_length(&sb, &sa));
        }

        #[test]
        fn appending_a_gold_never_decreases_scores(
            golds in proptest::collection::vec("[a-e ]{1,16}", 1..3),
            extra in "[a-e ]{1,16}",
            attempt in "[a-e ]{0,16}",
        ) {
            let golds: Vec<String> = golds.into_iter().filter(|g| !g.trim().is_empty()).collect();
            prop_assume!(!golds.is_empty() && !extra.trim().is_empty());
            let mut extended = golds.clone();
            extended.push(extra);
            let before = all_metric_scores(&golds, &attempt);
            // The TF-IDF corpus changes when a gold is added, so compare the
            // metrics whose context is unchanged (everything but tfidf).
            let after = all_metric_scores(&extended, &attempt);
            for (i, (b, a)) in before.iter().zip(after.iter()).enumerate() {
                if i == 6 {
                    continue;
                }
                prop_assert!(a >= b, "metric {i} decreased: {b} -> {a}");
            }
        }
    }
}

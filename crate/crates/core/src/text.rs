//! Text normalization, tokenization, n-grams, and TF-IDF vectorization shared
//! by the lexical metrics.
//!
//! The default normalization pipeline follows the common reading-comprehension
//! convention: lowercase, strip Unicode punctuation, drop standalone articles
//! (a/an/the), collapse whitespace. Every step can be toggled independently.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};

/// Toggles for the normalization pipeline; all default to on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub remove_articles: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            lowercase: true,
            strip_punctuation: true,
            remove_articles: true,
            collapse_whitespace: true,
        }
    }
}

/// Applies the configured pipeline. Idempotent under every configuration:
/// steps run in an order (case, punctuation, articles, whitespace) where no
/// step can reintroduce material a previous step removes.
pub fn normalize(text: &str, config: &NormalizationConfig) -> String {
    let mut out = if config.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if config.strip_punctuation {
        out.retain(|c| !is_punctuation(c));
    }
    if config.remove_articles {
        out = remove_article_tokens(&out);
    }
    if config.collapse_whitespace {
        out = out.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    out
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

fn is_article(token: &str) -> bool {
    token.eq_ignore_ascii_case("a")
        || token.eq_ignore_ascii_case("an")
        || token.eq_ignore_ascii_case("the")
}

/// Drops whitespace-delimited article tokens, leaving surrounding whitespace
/// untouched so the collapse step stays independent.
fn remove_article_tokens(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !is_article(&token) {
                out.push_str(&token);
            }
            token.clear();
            out.push(c);
        } else {
            token.push(c);
        }
    }
    if !is_article(&token) {
        out.push_str(&token);
    }
    out
}

/// An ordered sequence of whitespace-free, nonempty tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    /// Builds a sequence from explicit tokens, validating the invariant.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for token in &tokens {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::InvalidToken(token.clone()));
            }
        }
        Ok(TokenSeq { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits on runs of whitespace. The input is taken as-is; callers normalize
/// first when they want the canonical pipeline applied.
pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq {
        tokens: text.split_whitespace().map(str::to_string).collect(),
    }
}

/// Multiset of n-grams (as token windows) with multiplicities.
pub fn ngrams(seq: &TokenSeq, n: usize) -> Result<HashMap<Vec<String>, usize>> {
    if n == 0 {
        return Err(Error::InvalidNgramOrder);
    }
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for window in seq.tokens().windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Smoothed TF-IDF model: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, so every
/// vocabulary term keeps a strictly positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    document_count: usize,
}

impl TfIdfModel {
    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }
}

/// Fits a TF-IDF model over the corpus. Vocabulary indices follow first
/// appearance order, so fitting is deterministic.
pub fn fit_tfidf(corpus: &[TokenSeq]) -> Result<TfIdfModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut vocabulary: HashMap<String, usize> = HashMap::new();
    let mut document_frequency: Vec<usize> = Vec::new();
    for doc in corpus {
        let mut seen = std::collections::HashSet::new();
        for token in doc.tokens() {
            if seen.insert(token.as_str()) {
                let next = vocabulary.len();
                let index = *vocabulary.entry(token.clone()).or_insert(next);
                if index == document_frequency.len() {
                    document_frequency.push(0);
                }
                document_frequency[index] += 1;
            }
        }
    }
    let n = corpus.len() as f64;
    let idf = document_frequency
        .iter()
        .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
        .collect();
    Ok(TfIdfModel {
        vocabulary,
        idf,
        document_count: corpus.len(),
    })
}

/// Sparse vector over a TF-IDF vocabulary, sorted by term index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector(Vec<(usize, f64)>);

impl SparseVector {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&(_, w)| w == 0.0)
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.0[pos].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.0[i].1 * other.0[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }
}

/// Raw term count times idf per in-vocabulary term; out-of-vocabulary terms
/// are ignored.
pub fn vectorize(model: &TfIdfModel, seq: &TokenSeq) -> SparseVector {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for token in seq.tokens() {
        if let Some(&index) = model.vocabulary.get(token) {
            *counts.entry(index).or_insert(0) += 1;
        }
    }
    let mut components: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(index, count)| (index, count as f64 * model.idf[index]))
        .collect();
    components.sort_unstable_by_key(|&(i, _)| i);
    SparseVector(components)
}

/// Cosine of two sparse vectors; zero when either vector is zero.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(b) / denom
    }
}

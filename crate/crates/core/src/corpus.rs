//! Article–summary corpus: JSONL ingestion, text cleaning, length
//! filtering, statistics and seeded splitting.

use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::text::DANDA;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty corpus")]
    Empty,
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios((f64, f64, f64)),
    #[error("length bounds must satisfy min <= max: {0:?}")]
    BadFilter(LengthFilter),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArticlePair {
    pub id: String,
    pub article: String,
    pub summary: String,
}

impl ArticlePair {
    pub fn article_words(&self) -> usize {
        word_count(&self.article)
    }

    pub fn summary_words(&self) -> usize {
        word_count(&self.summary)
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// A JSONL line that could not be turned into an [`ArticlePair`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub pairs: Vec<ArticlePair>,
    pub errors: Vec<LineError>,
}

/// Reads one JSON object per line. Blank lines are skipped; bad lines are
/// reported with their 1-based line number.
pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, CorpusError> {
    let contents = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_corpus(&contents))
}

pub fn parse_corpus(contents: &str) -> LoadedCorpus {
    let mut out = LoadedCorpus::default();
    for (i, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ArticlePair>(line) {
            Ok(pair) => out.pairs.push(pair),
            Err(e) => out.errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    out
}

pub fn to_jsonl(pairs: &[ArticlePair]) -> String {
    let mut s = String::new();
    for p in pairs {
        s.push_str(&serde_json::to_string(p).expect("pairs always serialize"));
        s.push('\n');
    }
    s
}

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z][A-Za-z0-9+.\-]*://\S*|www\.\S*").unwrap());

/// Bengali block U+0980–U+09FF (digits included) plus the danda.
pub fn is_permitted(c: char) -> bool {
    matches!(c, '\u{0980}'..='\u{09FF}' | DANDA)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CleanOutcome {
    pub text: String,
    /// URLs and whitespace tokens that were removed outright.
    pub dropped: Vec<String>,
}

/// Removes URLs, strips every codepoint outside the Bengali block and the
/// danda from each word (dropping words left empty), and collapses
/// whitespace. Idempotent.
pub fn clean_text(raw: &str) -> String {
    clean_text_report(raw).text
}

pub fn clean_text_report(raw: &str) -> CleanOutcome {
    let mut dropped: Vec<String> = URL.find_iter(raw).map(|m| m.as_str().to_string()).collect();
    let without_urls = URL.replace_all(raw, " ");
    let mut words = Vec::new();
    for tok in without_urls.split_whitespace() {
        let kept: String = tok.chars().filter(|&c| is_permitted(c)).collect();
        if kept.is_empty() {
            dropped.push(tok.to_string());
        } else {
            words.push(kept);
        }
    }
    CleanOutcome {
        text: words.join(" "),
        dropped,
    }
}

/// Cleans both fields of every pair; runs in parallel, keeps input order.
pub fn clean_pairs(pairs: &[ArticlePair]) -> Vec<(ArticlePair, Vec<String>)> {
    pairs
        .par_iter()
        .map(|p| {
            let a = clean_text_report(&p.article);
            let s = clean_text_report(&p.summary);
            let mut dropped = a.dropped;
            dropped.extend(s.dropped);
            (
                ArticlePair {
                    id: p.id.clone(),
                    article: a.text,
                    summary: s.text,
                },
                dropped,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthFilter {
    pub article_min: usize,
    pub article_max: usize,
    pub summary_min: usize,
    pub summary_max: usize,
}

impl Default for LengthFilter {
    /// Word-count bounds of the reference news corpus.
    fn default() -> Self {
        Self {
            article_min: 5,
            article_max: 76,
            summary_min: 3,
            summary_max: 12,
        }
    }
}

impl LengthFilter {
    pub fn new(
        article_min: usize,
        article_max: usize,
        summary_min: usize,
        summary_max: usize,
    ) -> Result<Self, CorpusError> {
        let f = Self {
            article_min,
            article_max,
            summary_min,
            summary_max,
        };
        if article_min > article_max || summary_min > summary_max {
            return Err(CorpusError::BadFilter(f));
        }
        Ok(f)
    }

    pub fn admits(&self, pair: &ArticlePair) -> bool {
        let (a, s) = (pair.article_words(), pair.summary_words());
        (self.article_min..=self.article_max).contains(&a)
            && (self.summary_min..=self.summary_max).contains(&s)
    }
}

pub fn filter_pairs(pairs: Vec<ArticlePair>, filter: &LengthFilter) -> Vec<ArticlePair> {
    pairs.into_iter().filter(|p| filter.admits(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_pairs: usize,
    pub article_max_words: usize,
    pub article_min_words: usize,
    pub summary_max_words: usize,
    pub summary_min_words: usize,
    pub mean_article_words: f64,
    pub mean_summary_words: f64,
}

pub fn compute_stats(pairs: &[ArticlePair]) -> Result<CorpusStats, CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::Empty);
    }
    let articles: Vec<usize> = pairs.iter().map(ArticlePair::article_words).collect();
    let summaries: Vec<usize> = pairs.iter().map(ArticlePair::summary_words).collect();
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
    Ok(CorpusStats {
        total_pairs: pairs.len(),
        article_max_words: *articles.iter().max().unwrap(),
        article_min_words: *articles.iter().min().unwrap(),
        summary_max_words: *summaries.iter().max().unwrap(),
        summary_min_words: *summaries.iter().min().unwrap(),
        mean_article_words: mean(&articles),
        mean_summary_words: mean(&summaries),
    })
}

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<ArticlePair>,
    pub val: Vec<ArticlePair>,
    pub test: Vec<ArticlePair>,
}

/// Seeded shuffle, then `floor(n·val)` and `floor(n·test)` records for the
/// held-out parts; the remainder goes to train.
pub fn split_corpus(
    pairs: &[ArticlePair],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Split, CorpusError> {
    let (tr, va, te) = ratios;
    let all_positive = [tr, va, te].iter().all(|r| r.is_finite() && *r > 0.0);
    if !all_positive || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(ratios));
    }
    let n = pairs.len();
    // the epsilon absorbs representation error such as 0.29 * 100 = 28.999…
    let n_val = (n as f64 * va + 1e-9).floor() as usize;
    let n_test = (n as f64 * te + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let take = |idx: &[usize]| idx.iter().map(|&i| pairs[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: take(&order[..n_train]),
        val: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}

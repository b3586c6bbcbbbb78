//! Accuracy, precision, recall and F1 over generated summaries.
//!
//! A generated summary is scored against its reference by multiset token
//! overlap: TP is the clipped count of shared tokens, FP the surplus
//! predicted tokens, FN the missed reference tokens. Generation has no
//! meaningful true-negative set, so TN is always 0 and accuracy reduces to
//! `TP / (TP + FP + FN)`. Corpus figures are micro-averaged.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ArticlePair;
use crate::model::{ModelError, Seq2SeqModel};
use crate::text::{decode_tokens, encode, join_tokens, tokenize, TextError, Vocabulary};
use crate::train::{encode_pairs, evaluate_loss};

pub const TN_NOTE: &str =
    "TN is fixed at 0 for generation: accuracy = TP / (TP + FP + FN) over multiset token overlap";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no pairs to evaluate")]
    Empty,
    #[error("accuracy undefined: all confusion counts are zero")]
    NoCounts,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

pub fn token_overlap_counts<S: AsRef<str>>(predicted: &[S], reference: &[S]) -> ConfusionCounts {
    let mut ref_counts: HashMap<&str, u64> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut pred_counts: HashMap<&str, u64> = HashMap::new();
    for t in predicted {
        *pred_counts.entry(t.as_ref()).or_default() += 1;
    }
    let tp: u64 = pred_counts
        .iter()
        .map(|(t, &n)| n.min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum();
    ConfusionCounts {
        tp,
        tn: 0,
        fp: predicted.len() as u64 - tp,
        fn_: reference.len() as u64 - tp,
    }
}

/// A ratio whose denominator may be zero; then `value` is 0 and
/// `degenerate` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64) -> Ratio {
    if den == 0 {
        Ratio {
            value: 0.0,
            degenerate: true,
        }
    } else {
        Ratio {
            value: num as f64 / den as f64,
            degenerate: false,
        }
    }
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64, EvalError> {
    let total = c.tp + c.tn + c.fp + c.fn_;
    if total == 0 {
        return Err(EvalError::NoCounts);
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

pub fn precision(c: &ConfusionCounts) -> Ratio {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> Ratio {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy_degenerate: bool,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
}

impl MetricReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let (acc, acc_degenerate) = match accuracy(&counts) {
            Ok(a) => (a, false),
            Err(_) => (0.0, true),
        };
        let p = precision(&counts);
        let r = recall(&counts);
        Self {
            counts,
            accuracy: acc,
            precision: p.value,
            recall: r.value,
            f1: f1(p.value, r.value),
            accuracy_degenerate: acc_degenerate,
            precision_degenerate: p.degenerate,
            recall_degenerate: r.degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEval {
    pub id: String,
    pub article: String,
    pub reference: String,
    pub generated: String,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub note: &'static str,
    pub corpus: MetricReport,
    pub teacher_forced_accuracy: f64,
    pub pairs: Vec<PairEval>,
}

/// Greedy-decodes every article and scores it against its summary.
pub fn evaluate_corpus(
    model: &Seq2SeqModel,
    vocab: &Vocabulary,
    pairs: &[ArticlePair],
    max_len: usize,
) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let rows = pairs
        .par_iter()
        .map(|pair| -> Result<PairEval, EvalError> {
            let src = encode(&tokenize(&pair.article), vocab, false);
            let ids = model.decode_greedy(&src, max_len)?;
            let predicted = decode_tokens(&ids, vocab)?;
            let reference = tokenize(&pair.summary);
            let reference: Vec<&str> = reference.iter().map(String::as_str).collect();
            let counts = token_overlap_counts(&predicted, &reference);
            Ok(PairEval {
                id: pair.id.clone(),
                article: pair.article.clone(),
                reference: pair.summary.clone(),
                generated: join_tokens(&predicted),
                metrics: MetricReport::from_counts(counts),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let corpus = MetricReport::from_counts(rows.iter().map(|r| r.metrics.counts).sum());
    let tf = evaluate_loss(model, &encode_pairs(pairs, vocab))?;
    Ok(EvalReport {
        note: TN_NOTE,
        corpus,
        teacher_forced_accuracy: tf.accuracy,
        pairs: rows,
    })
}

impl EvalReport {
    /// Human-readable article / reference / generated listing.
    pub fn side_by_side(&self) -> String {
        let mut s = String::new();
        let c = &self.corpus;
        let _ = writeln!(
            s,
            "corpus: accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  teacher-forced accuracy {:.4}",
            c.accuracy, c.precision, c.recall, c.f1, self.teacher_forced_accuracy
        );
        let _ = writeln!(s, "note: {}", self.note);
        for p in &self.pairs {
            let _ = writeln!(s, "\n[{}]  f1 {:.4}", p.id, p.metrics.f1);
            let _ = writeln!(s, "  article   : {}", p.article);
            let _ = writeln!(s, "  reference : {}", p.reference);
            let _ = writeln!(s, "  generated : {}", p.generated);
        }
        s
    }
}

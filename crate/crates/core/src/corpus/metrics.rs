use std::collections::HashSet;
use std::fmt;

use super::{validate_spans, Sentence, Span, Vocabulary};
use crate::error::{CorpusError, Result};

/// Word-level precision, recall, F value and OOV recall.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_value: f64,
    /// Recall over gold words absent from the training vocabulary; 0 when
    /// the gold side has no such words.
    pub oov_recall: f64,
    pub gold_words: usize,
    pub pred_words: usize,
    pub correct: usize,
    pub gold_oov: usize,
    pub correct_oov: usize,
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl SegMetrics {
    fn from_counts(gold: usize, pred: usize, correct: usize, gold_oov: usize, correct_oov: usize) -> Self {
        let precision = ratio(correct, pred);
        let recall = ratio(correct, gold);
        SegMetrics {
            precision,
            recall,
            f_value: f_score(precision, recall),
            oov_recall: ratio(correct_oov, gold_oov),
            gold_words: gold,
            pred_words: pred,
            correct,
            gold_oov,
            correct_oov,
        }
    }
}

/// `P\tR\tF\tOOV` as percentages with two decimals.
impl fmt::Display for SegMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.2}\t{:.2}\t{:.2}\t{:.2}",
            self.precision * 100.0,
            self.recall * 100.0,
            self.f_value * 100.0,
            self.oov_recall * 100.0
        )
    }
}

/// Scores predicted segmentations against gold by exact span matching.
///
/// OOV words are gold words not flagged as training entries in
/// `train_vocab`, so externally injected words still count as OOV.
pub fn evaluate(gold: &[Sentence], pred: &[Vec<Span>], train_vocab: &Vocabulary) -> Result<SegMetrics> {
    if gold.len() != pred.len() {
        return Err(
            CorpusError::Validation(format!("{} gold sentences but {} predictions", gold.len(), pred.len())).into(),
        );
    }
    let (mut n_gold, mut n_pred, mut correct, mut n_oov, mut correct_oov) = (0, 0, 0, 0, 0);
    for (idx, (sentence, pred_spans)) in gold.iter().zip(pred).enumerate() {
        let gold_spans = sentence
            .gold
            .as_ref()
            .ok_or_else(|| CorpusError::Validation(format!("sentence {} has no gold segmentation", idx + 1)))?;
        validate_spans(pred_spans, sentence.len())
            .map_err(|e| CorpusError::Validation(format!("prediction for sentence {}: {e}", idx + 1)))?;
        let predicted: HashSet<Span> = pred_spans.iter().copied().collect();
        n_gold += gold_spans.len();
        n_pred += pred_spans.len();
        for span in gold_spans {
            let hit = predicted.contains(span);
            correct += usize::from(hit);
            let word: String = span.slice(&sentence.chars).iter().collect();
            if !train_vocab.in_train(&word) {
                n_oov += 1;
                correct_oov += usize::from(hit);
            }
        }
    }
    Ok(SegMetrics::from_counts(n_gold, n_pred, correct, n_oov, correct_oov))
}

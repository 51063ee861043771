//! Evaluation metrics shared by every attack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adversary advantage `2 * (accuracy - 0.5)`.
pub fn advantage(accuracy: f64) -> f64 {
    2.0 * (accuracy - 0.5)
}

/// Fraction of positions where `predicted == truth`.
pub fn accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("accuracy"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    Ok(())
}

/// Area under the ROC curve via the Mann-Whitney U statistic; tied scores
/// share their average rank, i.e. a tied positive/negative pair counts 1/2.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_binary(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("roc_auc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                pos_rank_sum += mean_rank;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Average precision: the mean, over positives, of the precision at the
/// position of each positive in descending-score order. Ties keep input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_binary(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::Degenerate(
            "average_precision needs a positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / n_pos as f64)
}

/// Unweighted mean over `k_classes` of per-class F1. A class with no true
/// positives (including one that never occurs) scores 0.
pub fn f1_macro(predictions: &[usize], labels: &[usize], k_classes: usize) -> Result<f64> {
    if k_classes < 2 {
        return Err(Error::invalid("f1_macro needs at least two classes"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if let Some(&c) = predictions.iter().chain(labels).find(|&&c| c >= k_classes) {
        return Err(Error::invalid(format!(
            "class {c} out of range for {k_classes} classes"
        )));
    }
    let mut tp = vec![0usize; k_classes];
    let mut pred_count = vec![0usize; k_classes];
    let mut true_count = vec![0usize; k_classes];
    for (&p, &t) in predictions.iter().zip(labels) {
        pred_count[p] += 1;
        true_count[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let total: f64 = (0..k_classes)
        .map(|c| {
            if tp[c] == 0 {
                return 0.0;
            }
            let precision = tp[c] as f64 / pred_count[c] as f64;
            let recall = tp[c] as f64 / true_count[c] as f64;
            2.0 * precision * recall / (precision + recall)
        })
        .sum();
    Ok(total / k_classes as f64)
}

/// Macro-F1 of always predicting the most frequent label.
pub fn majority_f1(labels: &[usize], k_classes: usize) -> Result<f64> {
    let mut counts = vec![0usize; k_classes];
    for &l in labels {
        if l >= k_classes {
            return Err(Error::invalid(format!("class {l} out of range")));
        }
        counts[l] += 1;
    }
    let majority = (0..k_classes)
        .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
        .unwrap_or(0);
    f1_macro(&vec![majority; labels.len()], labels, k_classes)
}

/// Metrics reported for one attack run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub accuracy: Option<f64>,
    /// `2 * (accuracy - 0.5)`.
    pub advantage: Option<f64>,
    /// `accuracy - 0.5`, the "points above random guessing" reading.
    pub accuracy_above_chance: Option<f64>,
    pub auc: Option<f64>,
    pub average_precision: Option<f64>,
    pub f1_macro: Option<f64>,
    pub support_positive: usize,
    pub support_negative: usize,
}

impl MetricBundle {
    pub fn from_accuracy(acc: f64) -> Self {
        Self {
            accuracy: Some(acc),
            advantage: Some(advantage(acc)),
            accuracy_above_chance: Some(acc - 0.5),
            ..Default::default()
        }
    }

    /// Accuracy-based metrics plus AUC/AP for binary scores and decisions.
    pub fn binary(scores: &[f64], decisions: &[bool], truth: &[bool]) -> Result<Self> {
        let mut m = Self::from_accuracy(accuracy(decisions, truth)?);
        m.support_positive = truth.iter().filter(|&&t| t).count();
        m.support_negative = truth.len() - m.support_positive;
        if m.support_positive > 0 && m.support_negative > 0 {
            m.auc = Some(roc_auc(scores, truth)?);
            m.average_precision = Some(average_precision(scores, truth)?);
        }
        Ok(m)
    }
}

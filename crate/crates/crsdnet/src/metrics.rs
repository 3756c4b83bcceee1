//! Ranking metrics over the spam-belief ordering: ROC AUC, average
//! precision, precision@k and NDCG@k.
//!
//! AUC follows the Mann-Whitney statistic with the 1/2 tie correction;
//! the other metrics rank by score descending with ties broken by index,
//! so every metric is deterministic and invariant under strictly
//! increasing score transforms.

use crate::data_model::ClassLabel;
use crate::error::{CrsdError, Result};

/// Scores ranked descending with their ground-truth labels.
#[derive(Debug, Clone)]
pub struct RankedResult {
    /// original indices ordered by score descending (ties by index).
    pub order: Vec<usize>,
    /// labels in ranked order.
    pub labels: Vec<ClassLabel>,
    /// scores in ranked order (non-increasing).
    pub scores: Vec<f64>,
}

impl RankedResult {
    pub fn new(scores: &[f64], labels: &[ClassLabel]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(CrsdError::Dimension {
                expected: scores.len(),
                got: labels.len(),
            });
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        Ok(RankedResult {
            labels: order.iter().map(|&i| labels[i]).collect(),
            scores: order.iter().map(|&i| scores[i]).collect(),
            order,
        })
    }
}

/// ROC AUC: Pr[score(spammer) > score(benign)] + 1/2 Pr[tie].
pub fn auc(scores: &[f64], labels: &[ClassLabel]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(CrsdError::Dimension {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|l| l.is_spammer()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CrsdError::MetricUndefined(
            "AUC needs both classes present".into(),
        ));
    }

    // rank-sum with average ranks for ties
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j]
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k].is_spammer() {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Step-wise average precision: mean over positives of precision at their
/// rank.
pub fn average_precision(scores: &[f64], labels: &[ClassLabel]) -> Result<f64> {
    let ranked = RankedResult::new(scores, labels)?;
    let n_pos = ranked.labels.iter().filter(|l| l.is_spammer()).count();
    if n_pos == 0 {
        return Err(CrsdError::MetricUndefined(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut hits = 0usize;
    let mut sum = 0.0f64;
    for (r, label) in ranked.labels.iter().enumerate() {
        if label.is_spammer() {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// Fraction of true spammers among the top k.
pub fn precision_at_k(ranked: &RankedResult, k: usize) -> Result<f64> {
    if k == 0 || k > ranked.labels.len() {
        return Err(CrsdError::InvalidParam(format!(
            "k={k} out of range 1..={}",
            ranked.labels.len()
        )));
    }
    let hits = ranked.labels[..k].iter().filter(|l| l.is_spammer()).count();
    Ok(hits as f64 / k as f64)
}

/// NDCG@k with binary gains (2^l - 1) / log2(i + 1), normalized by the
/// ideal ranking where every top-k entry is a spammer.
pub fn ndcg_at_k(ranked: &RankedResult, k: usize) -> Result<f64> {
    if k == 0 || k > ranked.labels.len() {
        return Err(CrsdError::InvalidParam(format!(
            "k={k} out of range 1..={}",
            ranked.labels.len()
        )));
    }
    if !ranked.labels.iter().any(|l| l.is_spammer()) {
        return Err(CrsdError::MetricUndefined(
            "NDCG needs at least one spammer in the dataset".into(),
        ));
    }
    let discount = |i: usize| ((i + 1) as f64 + 1.0).log2();
    let dcg: f64 = ranked.labels[..k]
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if l.is_spammer() {
                1.0 / discount(i)
            } else {
                0.0
            }
        })
        .sum();
    let ideal: f64 = (0..k).map(|i| 1.0 / discount(i)).sum();
    Ok(dcg / ideal)
}

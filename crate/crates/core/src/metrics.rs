//! Binary classification metrics.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: f64,
    pub mcc: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("{labels} labels but {scores} scores")]
    Length { labels: usize, scores: usize },
    #[error("AUC is undefined when y_true holds a single class")]
    SingleClass,
    #[error("label {0} is not binary")]
    NonBinary(u8),
}

/// Predicted label for a positive-class score.
#[inline]
pub fn classify(score: f64, threshold: f64) -> u8 {
    u8::from(score >= threshold)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn tally(y_true: &[u8], y_pred: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (0, _) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.tn + self.fp + self.fn_;
        if n == 0 { 0.0 } else { (self.tp + self.tn) as f64 / n as f64 }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Matthews correlation; 0 when any margin of the table is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if den == 0.0 {
            return 0.0;
        }
        (tp * tn - fp * fn_) / math::sqrt(den)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 { 0.0 } else { a as f64 / b as f64 }
}

/// Area under the ROC curve from the rank statistic, ties receiving midranks.
pub fn auc(y_true: &[u8], y_score: &[f64]) -> Result<f64, MetricsError> {
    check_inputs(y_true, y_score)?;
    let n_pos = y_true.iter().filter(|&&t| t == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..y_score.len()).collect();
    order.sort_by(|&a, &b| y_score[a].total_cmp(&y_score[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && y_score[order[j + 1]] == y_score[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if y_true[k] == 1 {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

fn check_inputs(y_true: &[u8], y_score: &[f64]) -> Result<(), MetricsError> {
    if y_true.len() != y_score.len() {
        return Err(MetricsError::Length { labels: y_true.len(), scores: y_score.len() });
    }
    if y_true.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&bad) = y_true.iter().find(|&&t| t > 1) {
        return Err(MetricsError::NonBinary(bad));
    }
    Ok(())
}

/// All metrics for positive-class scores, thresholded at `threshold`.
pub fn metrics(y_true: &[u8], y_score: &[f64], threshold: f64) -> Result<Metrics, MetricsError> {
    let auc = auc(y_true, y_score)?;
    let pred: Vec<u8> = y_score.iter().map(|&s| classify(s, threshold)).collect();
    let c = Confusion::tally(y_true, &pred);
    Ok(Metrics { accuracy: c.accuracy(), auc, mcc: c.mcc(), precision: c.precision(), recall: c.recall() })
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary classification scores at a fixed logit threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub auroc: f64,
}

/// F1 of the positive class, predicting positive when `score > threshold`.
/// Zero when there are no predicted or no actual positives.
pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check(scores, labels)?;
    Ok(compute(scores, labels, threshold).f1)
}

/// Area under the ROC curve via the rank statistic; tied scores share their
/// average rank. Undefined when one class is absent.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let n = scores.len();
    let pos = labels.iter().filter(|&&b| b).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Config("AUROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    Ok((rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos * neg) as f64)
}

fn check(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Config("metrics of an empty prediction set".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Dim {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    Ok(())
}

/// All scores at once. AUROC is NaN when it is undefined.
pub fn compute(scores: &[f64], labels: &[bool], threshold: f64) -> Metrics {
    let (mut tp, mut fp, mut fneg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if tp == 0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Metrics {
        f1,
        precision,
        recall,
        accuracy: ratio(tp + tn, scores.len()),
        auroc: auroc(scores, labels).unwrap_or(f64::NAN),
    }
}

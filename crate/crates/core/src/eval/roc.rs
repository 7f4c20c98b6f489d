use serde::Serialize;

use crate::error::{Error, Result};

/// ROC curve over a threshold sweep plus the rank-statistic AUC.
///
/// Point `i` predicts abnormal for `score >= thresholds[i]`; the first
/// threshold is +∞ so the curve starts at (0, 0) and ends at (1, 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    /// Area under the stored curve by the trapezoidal rule.
    pub fn trapezoid_auc(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(f, t)| (f[1] - f[0]) * (t[1] + t[0]) * 0.5)
            .sum()
    }

    /// `threshold,fpr,tpr` rows for external plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for i in 0..self.thresholds.len() {
            s.push_str(&format!("{},{},{}\n", self.thresholds[i], self.fpr[i], self.tpr[i]));
        }
        s
    }
}

/// `scores` pairs a score with whether the sample is abnormal (positive).
/// The AUC is the Mann–Whitney statistic with average ranks for ties.
pub fn roc_auc(scores: &[(f64, bool)]) -> Result<RocCurve> {
    if scores.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let n_pos = scores.iter().filter(|(_, a)| *a).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid(format!(
            "ROC needs both classes (abnormal {n_pos}, normal {n_neg})"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));

    // ascending pass: average ranks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| scores[k].1).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let auc = (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);

    // descending pass: curve
    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = order.len();
    while i > 0 {
        let s = scores[order[i - 1]].0;
        while i > 0 && scores[order[i - 1]].0 == s {
            if scores[order[i - 1]].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i -= 1;
        }
        thresholds.push(s);
        tpr.push(tp as f64 / np);
        fpr.push(fp as f64 / nn);
    }
    Ok(RocCurve {
        thresholds,
        tpr,
        fpr,
        auc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfusionMetrics {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// A sample is predicted abnormal when `score > threshold`. Ratios with an
/// empty denominator are reported as 0.
pub fn confusion_metrics(scores: &[(f64, bool)], threshold: f64) -> Result<ConfusionMetrics> {
    if threshold.is_nan() {
        return Err(Error::invalid("threshold is NaN"));
    }
    if scores.is_empty() {
        return Err(Error::invalid("no scores"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for &(s, abnormal) in scores {
        match (s > threshold, abnormal) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionMetrics {
        threshold,
        tp,
        fp,
        tn,
        fn_,
        accuracy: ratio(tp + tn, scores.len()),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
    })
}

/// Threshold maximizing sensitivity + specificity − 1. Candidates are the
/// midpoints between consecutive distinct scores plus one threshold below
/// and one at the top of the range; the lowest maximizing threshold wins.
pub fn youden_threshold(scores: &[(f64, bool)]) -> Result<f64> {
    let n_pos = scores.iter().filter(|(_, a)| *a).count();
    if n_pos == 0 || n_pos == scores.len() {
        return Err(Error::invalid("Youden threshold needs both classes"));
    }
    let mut uniq: Vec<f64> = scores.iter().map(|s| s.0).collect();
    if uniq.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mut candidates = vec![uniq[0] - 1.0];
    candidates.extend(uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(*uniq.last().expect("non-empty"));

    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for t in candidates {
        let m = confusion_metrics(scores, t)?;
        let j = m.sensitivity + m.specificity - 1.0;
        if j > best.0 {
            best = (j, t);
        }
    }
    Ok(best.1)
}

//! Evaluation: clustering agreement, ROC analysis, thresholded confusion
//! metrics and the one-class cross-validation protocol.

mod clustering;
mod crossval;
mod roc;
mod scores;

pub use clustering::{contingency, v_measure, ClusterScoreReport, Contingency, NoiseMode};
pub use crossval::{crossval_occ, ClassFold, ClassSummary, CrossvalConfig, CrossvalReport, FoldResult, MeanStd};
pub use roc::{confusion_metrics, roc_auc, youden_threshold, ConfusionMetrics, RocCurve};
pub use scores::{evaluate_scores, ClassScore, ScoreEvalReport, ThresholdRule};

/// Sample mean and (N−1) standard deviation; std is 0 for a single value.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

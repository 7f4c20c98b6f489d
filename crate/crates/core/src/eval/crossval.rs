use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion_metrics, mean_std, roc_auc, youden_threshold, ConfusionMetrics};
use crate::error::{Error, Result};
use crate::io::{stratified_kfold, Dataset, Report};
use crate::occ::{fit_normal, score, CovarianceEstimator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    pub folds: usize,
    pub normal_label: String,
    pub seed: u64,
    pub estimator: CovarianceEstimator,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            normal_label: "NILM".into(),
            seed: 0,
            estimator: CovarianceEstimator::Printed,
        }
    }
}

/// Metrics of one class (or of all abnormals pooled) against the normals
/// of one held-out fold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassFold {
    pub auc: f64,
    pub confusion: Option<ConfusionMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train_normals: usize,
    pub n_test: usize,
    /// Chosen by Youden's J on out-of-fold scores; absent when the
    /// out-of-fold records hold no abnormal sample.
    pub threshold: Option<f64>,
    pub overall: Option<ClassFold>,
    /// Keyed by abnormal class; a class missing from the fold is absent.
    pub per_class: BTreeMap<String, ClassFold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        mean_std(values).map(|(mean, std)| Self { mean, std })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3}±{:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: String,
    pub folds_present: usize,
    pub auc: Option<MeanStd>,
    pub accuracy: Option<MeanStd>,
    pub f1: Option<MeanStd>,
    pub sensitivity: Option<MeanStd>,
    pub specificity: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossvalReport {
    pub config: CrossvalConfig,
    pub folds: Vec<FoldResult>,
    /// Normal versus every other label.
    pub overall: ClassSummary,
    pub per_class: Vec<ClassSummary>,
    pub undersized_labels: Vec<String>,
}

fn summarize<'a>(class: &str, items: impl Iterator<Item = &'a ClassFold>) -> ClassSummary {
    let items: Vec<&ClassFold> = items.collect();
    let conf: Vec<&ConfusionMetrics> = items.iter().filter_map(|c| c.confusion.as_ref()).collect();
    let pick = |f: fn(&ConfusionMetrics) -> f64| MeanStd::of(&conf.iter().map(|c| f(c)).collect::<Vec<_>>());
    ClassSummary {
        class: class.to_string(),
        folds_present: items.len(),
        auc: MeanStd::of(&items.iter().map(|c| c.auc).collect::<Vec<_>>()),
        accuracy: pick(|c| c.accuracy),
        f1: pick(|c| c.f1),
        sensitivity: pick(|c| c.sensitivity),
        specificity: pick(|c| c.specificity),
    }
}

fn class_fold(scored: &[(f64, bool)], threshold: Option<f64>) -> Result<Option<ClassFold>> {
    let has_pos = scored.iter().any(|s| s.1);
    let has_neg = scored.iter().any(|s| !s.1);
    if !(has_pos && has_neg) {
        return Ok(None);
    }
    Ok(Some(ClassFold {
        auc: roc_auc(scored)?.auc,
        confusion: threshold.map(|t| confusion_metrics(scored, t)).transpose()?,
    }))
}

/// Stratified k-fold evaluation of the one-class scorer.
///
/// For each fold the normal model is fit on the normal records of the other
/// folds, every held-out record is scored by its posterior mean, and AUC is
/// computed for normal-vs-rest and for each abnormal class against the
/// held-out normals. The confusion-metric threshold is chosen by Youden's J
/// on the out-of-fold records, so the held-out fold never influences it.
pub fn crossval_occ(ds: &Dataset, cfg: &CrossvalConfig) -> Result<CrossvalReport> {
    if !ds.records().iter().any(|r| r.label == cfg.normal_label) {
        return Err(Error::invalid(format!(
            "normal label `{}` not present in dataset",
            cfg.normal_label
        )));
    }
    let split = stratified_kfold(ds, cfg.folds, cfg.seed)?;
    let records = ds.records();
    let abnormal_classes: Vec<String> = ds
        .label_set()
        .into_iter()
        .filter(|l| *l != cfg.normal_label)
        .collect();

    let folds: Vec<FoldResult> = (0..cfg.folds)
        .into_par_iter()
        .map(|fold| -> Result<FoldResult> {
            let train = split.train_indices(fold);
            let test = split.test_indices(fold);
            let normals: Vec<_> = train
                .iter()
                .filter(|&&i| records[i].label == cfg.normal_label)
                .map(|&i| &records[i].posterior)
                .collect();
            let model = fit_normal(&normals, cfg.estimator)
                .map_err(|e| Error::invalid(format!("fold {fold}: {e}")))?;
            let score_of = |i: usize| {
                score(&model, records[i].posterior.mean()).map_err(|e| e.for_record(&records[i].id))
            };
            let out_of_fold: Vec<(f64, bool)> = train
                .iter()
                .map(|&i| Ok((score_of(i)?, records[i].label != cfg.normal_label)))
                .collect::<Result<_>>()?;
            let threshold = youden_threshold(&out_of_fold).ok();

            let held: Vec<(usize, f64)> =
                test.iter().map(|&i| Ok((i, score_of(i)?))).collect::<Result<_>>()?;
            let overall_scores: Vec<(f64, bool)> = held
                .iter()
                .map(|&(i, s)| (s, records[i].label != cfg.normal_label))
                .collect();
            let overall = class_fold(&overall_scores, threshold)?;

            let mut per_class = BTreeMap::new();
            for class in &abnormal_classes {
                let subset: Vec<(f64, bool)> = held
                    .iter()
                    .filter(|&&(i, _)| records[i].label == cfg.normal_label || records[i].label == *class)
                    .map(|&(i, s)| (s, records[i].label == *class))
                    .collect();
                if let Some(cf) = class_fold(&subset, threshold)? {
                    per_class.insert(class.clone(), cf);
                }
            }
            Ok(FoldResult {
                fold,
                n_train_normals: normals.len(),
                n_test: test.len(),
                threshold,
                overall,
                per_class,
            })
        })
        .collect::<Result<_>>()?;

    let overall = summarize("overall", folds.iter().filter_map(|f| f.overall.as_ref()));
    let per_class = abnormal_classes
        .iter()
        .map(|c| summarize(c, folds.iter().filter_map(|f| f.per_class.get(c))))
        .collect();
    Ok(CrossvalReport {
        config: cfg.clone(),
        folds,
        overall,
        per_class,
        undersized_labels: split.undersized_labels,
    })
}

fn cell(v: &Option<MeanStd>) -> String {
    v.map_or_else(|| "absent".to_string(), |m| m.to_string())
}

impl Report for CrossvalReport {
    fn render_text(&self) -> String {
        let mut s = format!(
            "one-class cross-validation: {} folds, normal label `{}`, seed {}, estimator {:?}\n",
            self.config.folds, self.config.normal_label, self.config.seed, self.config.estimator
        );
        s.push_str(&format!(
            "{:<12} {:>5} {:>13} {:>13} {:>13} {:>13} {:>13}\n",
            "class", "folds", "auc", "accuracy", "f1", "sensitivity", "specificity"
        ));
        for row in std::iter::once(&self.overall).chain(&self.per_class) {
            s.push_str(&format!(
                "{:<12} {:>5} {:>13} {:>13} {:>13} {:>13} {:>13}\n",
                row.class,
                row.folds_present,
                cell(&row.auc),
                cell(&row.accuracy),
                cell(&row.f1),
                cell(&row.sensitivity),
                cell(&row.specificity)
            ));
        }
        if !self.undersized_labels.is_empty() {
            s.push_str(&format!(
                "labels with fewer members than folds: {}\n",
                self.undersized_labels.join(", ")
            ));
        }
        s
    }
}

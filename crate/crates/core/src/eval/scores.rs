use std::str::FromStr;

use serde::Serialize;

use super::{confusion_metrics, roc_auc, youden_threshold, ConfusionMetrics, RocCurve};
use crate::error::{Error, Result};
use crate::io::{Report, ScoreRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    Youden,
    Value(f64),
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "youden" {
            return Ok(Self::Youden);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .map(Self::Value)
            .ok_or_else(|| Error::invalid(format!("threshold must be `youden` or a number, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore {
    pub class: String,
    pub n_abnormal: usize,
    pub auc: f64,
    pub confusion: ConfusionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreEvalReport {
    pub normal_label: String,
    pub n_normal: usize,
    pub n_abnormal: usize,
    pub rule: ThresholdRule,
    pub threshold: f64,
    pub overall: ClassScore,
    pub per_class: Vec<ClassScore>,
    #[serde(skip)]
    pub curve: RocCurve,
}

fn class_score(class: &str, scored: &[(f64, bool)], threshold: f64) -> Result<ClassScore> {
    Ok(ClassScore {
        class: class.to_string(),
        n_abnormal: scored.iter().filter(|s| s.1).count(),
        auc: roc_auc(scored)?.auc,
        confusion: confusion_metrics(scored, threshold)?,
    })
}

/// AUC and threshold metrics of a scores file: normal label versus all
/// others, and, when `per_class` is set, each other label versus the normals.
/// A Youden threshold is chosen on the pooled normal-vs-rest scores.
pub fn evaluate_scores(
    rows: &[ScoreRow],
    normal_label: &str,
    per_class: bool,
    rule: ThresholdRule,
) -> Result<ScoreEvalReport> {
    let scored: Vec<(f64, bool)> = rows.iter().map(|r| (r.score, r.label != normal_label)).collect();
    let curve = roc_auc(&scored)?;
    let threshold = match rule {
        ThresholdRule::Youden => youden_threshold(&scored)?,
        ThresholdRule::Value(v) => v,
    };
    let overall = class_score("overall", &scored, threshold)?;
    let mut classes: Vec<&str> = rows
        .iter()
        .map(|r| r.label.as_str())
        .filter(|l| *l != normal_label)
        .collect();
    classes.sort_unstable();
    classes.dedup();
    let per_class = if per_class {
        classes
            .iter()
            .map(|c| {
                let subset: Vec<(f64, bool)> = rows
                    .iter()
                    .filter(|r| r.label == normal_label || r.label == *c)
                    .map(|r| (r.score, r.label == *c))
                    .collect();
                class_score(c, &subset, threshold)
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(ScoreEvalReport {
        normal_label: normal_label.to_string(),
        n_normal: scored.iter().filter(|s| !s.1).count(),
        n_abnormal: overall.n_abnormal,
        rule,
        threshold,
        overall,
        per_class,
        curve,
    })
}

impl Report for ScoreEvalReport {
    fn render_text(&self) -> String {
        let mut s = format!(
            "score evaluation: {} normal (`{}`), {} abnormal, threshold {:.6} ({})\n",
            self.n_normal,
            self.normal_label,
            self.n_abnormal,
            self.threshold,
            match self.rule {
                ThresholdRule::Youden => "youden",
                ThresholdRule::Value(_) => "fixed",
            }
        );
        s.push_str(&format!(
            "{:<12} {:>6} {:>8} {:>9} {:>8} {:>12} {:>12}\n",
            "class", "n", "auc", "accuracy", "f1", "sensitivity", "specificity"
        ));
        for c in std::iter::once(&self.overall).chain(&self.per_class) {
            let m = &c.confusion;
            s.push_str(&format!(
                "{:<12} {:>6} {:>8.4} {:>9.4} {:>8.4} {:>12.4} {:>12.4}\n",
                c.class, c.n_abnormal, c.auc, m.accuracy, m.f1, m.sensitivity, m.specificity
            ));
        }
        s
    }
}

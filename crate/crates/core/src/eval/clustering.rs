use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterAssignment, NOISE};
use crate::error::{Error, Result};
use crate::io::Report;

/// How DBSCAN noise points enter the contingency table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Every noise point is a cluster of its own.
    #[default]
    Singletons,
    /// All noise points share one cluster.
    OneCluster,
}

/// Class × cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contingency {
    pub classes: Vec<String>,
    pub clusters: Vec<String>,
    /// `counts[class][cluster]`
    pub counts: Vec<Vec<usize>>,
}

pub fn contingency<S: AsRef<str>>(
    truth: &[S],
    pred: &ClusterAssignment,
    noise: NoiseMode,
) -> Result<Contingency> {
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!(
            "truth has {} labels but prediction has {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("no labels to compare"));
    }
    // cluster keys sort regular clusters first, then noise
    let key = |i: usize, l: i64| -> (u8, i64, usize) {
        match (l, noise) {
            (NOISE, NoiseMode::Singletons) => (1, 0, i),
            (NOISE, NoiseMode::OneCluster) => (1, 0, 0),
            _ => (0, l, 0),
        }
    };
    let mut class_idx: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cluster_idx: BTreeMap<(u8, i64, usize), usize> = BTreeMap::new();
    for (i, t) in truth.iter().enumerate() {
        class_idx.entry(t.as_ref()).or_insert(0);
        cluster_idx.entry(key(i, pred.labels[i])).or_insert(0);
    }
    for (n, v) in class_idx.values_mut().enumerate() {
        *v = n;
    }
    for (n, v) in cluster_idx.values_mut().enumerate() {
        *v = n;
    }
    let mut counts = vec![vec![0usize; cluster_idx.len()]; class_idx.len()];
    for (i, t) in truth.iter().enumerate() {
        counts[class_idx[t.as_ref()]][cluster_idx[&key(i, pred.labels[i])]] += 1;
    }
    let clusters = cluster_idx
        .keys()
        .map(|&(noise_flag, l, i)| match (noise_flag, noise) {
            (0, _) => l.to_string(),
            (_, NoiseMode::Singletons) => format!("noise:{i}"),
            _ => "noise".to_string(),
        })
        .collect();
    Ok(Contingency {
        classes: class_idx.keys().map(|s| s.to_string()).collect(),
        clusters,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterScoreReport {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub contingency: Contingency,
}

fn entropy_of(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Homogeneity, completeness and their harmonic mean, in nats.
pub fn v_measure<S: AsRef<str>>(
    truth: &[S],
    pred: &ClusterAssignment,
    noise: NoiseMode,
) -> Result<ClusterScoreReport> {
    let table = contingency(truth, pred, noise)?;
    let n = truth.len() as f64;
    let class_tot: Vec<usize> = table.counts.iter().map(|r| r.iter().sum()).collect();
    let cluster_tot: Vec<usize> = (0..table.clusters.len())
        .map(|k| table.counts.iter().map(|r| r[k]).sum())
        .collect();
    let h_c = entropy_of(class_tot.iter().copied(), n);
    let h_k = entropy_of(cluster_tot.iter().copied(), n);
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (c, row) in table.counts.iter().enumerate() {
        for (k, &nck) in row.iter().enumerate() {
            if nck > 0 {
                let joint = nck as f64 / n;
                h_c_given_k -= joint * (nck as f64 / cluster_tot[k] as f64).ln();
                h_k_given_c -= joint * (nck as f64 / class_tot[c] as f64).ln();
            }
        }
    }
    let homogeneity = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let completeness = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    let v = if homogeneity + completeness > 0.0 {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    } else {
        0.0
    };
    Ok(ClusterScoreReport {
        homogeneity,
        completeness,
        v_measure: v,
        contingency: table,
    })
}

impl Report for ClusterScoreReport {
    fn render_text(&self) -> String {
        let mut s = format!(
            "{:<14} {:>10}\n{:<14} {:>10.6}\n{:<14} {:>10.6}\n{:<14} {:>10.6}\n",
            "metric", "value", "homogeneity", self.homogeneity, "completeness", self.completeness,
            "v_measure", self.v_measure
        );
        s.push_str(&format!(
            "contingency: {} classes x {} clusters\n",
            self.contingency.classes.len(),
            self.contingency.clusters.len()
        ));
        for (c, row) in self.contingency.classes.iter().zip(&self.contingency.counts) {
            let nz: Vec<String> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0)
                .map(|(k, v)| format!("{}:{v}", self.contingency.clusters[k]))
                .collect();
            s.push_str(&format!("  {c:<10} {}\n", nz.join(" ")));
        }
        s
    }
}

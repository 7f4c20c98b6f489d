//! Command implementations behind the `latent-occ` binary.
//!
//! Every command struct doubles as its own configuration record: the
//! serialized fields (output paths excluded) are hashed into the provenance
//! header written at the top of every artifact.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::cluster::{agglomerative, cut, dbscan, kmeans, DbscanConfig, Dissimilarity, KMeansConfig, Linkage};
use crate::crsd::{verify_identities, IdentityConfig, ProfileMatrix};
use crate::elbo::audit;
use crate::error::{Error, Result};
use crate::eval::{crossval_occ, evaluate_scores, v_measure, CrossvalConfig, MeanStd, NoiseMode, ThresholdRule};
use crate::fixture::{generate, Preset, BLOB_VAR_HIGH, BLOB_VAR_LOW};
use crate::io::{
    read_dataset, read_model, read_rows, write_dataset, write_matrix_file, write_model, write_report, write_rows,
    write_text, Dataset, Format, LabelRow, MatrixFile, Provenance, Report, ScoreRow,
};
use crate::occ::{score_dataset, CovarianceEstimator, NormalModel};
use crate::traverse::{grid_rows, traversal, Dims};

/// β values of the sweep grid.
pub const SWEEP_BETAS: [u32; 3] = [1, 4, 16];
/// Latent sizes of the sweep grid.
pub const SWEEP_DIMS: [usize; 3] = [8, 32, 128];
/// Augmentation regimes of the sweep grid.
pub const SWEEP_AUGS: [&str; 3] = ["none", "fa", "fab"];

/// Where a text report goes, and whether it gets a JSON twin.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportOut {
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Also write `<out>.json` with the machine-readable report.
    #[arg(long)]
    pub json: bool,
}

impl ReportOut {
    fn emit<T: Report>(&self, report: &T, prov: &Provenance) -> Result<()> {
        match &self.out {
            Some(path) => write_report(path, report, Some(prov), self.json),
            None => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "{}\n{}", prov.text_line(), report.render_text().trim_end())
                    .map_err(|e| Error::io("<stdout>", e))
            }
        }
    }
}

/// Dataset input with its format.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataIn {
    #[arg(long)]
    pub input: PathBuf,
    /// `jsonl` or `csv`; guessed from the extension when absent.
    #[arg(long)]
    pub format: Option<Format>,
}

impl DataIn {
    fn load(&self) -> Result<Dataset> {
        read_dataset(&self.input, self.format.unwrap_or_else(|| Format::from_path(&self.input)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    TwoClass,
    KBlobs,
    Degenerate,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FixtureCmd {
    #[arg(long, value_enum)]
    pub preset: PresetName,
    #[arg(long, default_value_t = 600)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    /// Mean shift of the abnormal class (two-class).
    #[arg(long, default_value_t = 3.0)]
    pub shift: f64,
    /// Number of blobs (k-blobs).
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Minimum distance between blob centres (k-blobs).
    #[arg(long, default_value_t = 6.0)]
    pub sep: f64,
    /// Scatter of member means around their centre (k-blobs).
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<Format>,
}

impl FixtureCmd {
    pub fn preset(&self) -> Preset {
        match self.preset {
            PresetName::TwoClass => Preset::two_class(self.n, self.dim, self.shift),
            PresetName::KBlobs => Preset::KBlobs {
                k: self.k,
                n: self.n,
                dim: self.dim,
                sep: self.sep,
                spread: self.spread,
                var_low: BLOB_VAR_LOW,
                var_high: BLOB_VAR_HIGH,
            },
            PresetName::Degenerate => Preset::Degenerate { dim: self.dim },
        }
    }

    pub fn run(&self) -> Result<()> {
        let ds = generate(&self.preset(), self.seed)?;
        let format = self.format.unwrap_or_else(|| Format::from_path(&self.out));
        write_dataset(&self.out, &ds, format, Some(&Provenance::for_config(self)))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitNormalCmd {
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long, default_value = "NILM")]
    pub label_normal: String,
    #[arg(long, value_enum, default_value_t = EstimatorName::Printed)]
    pub estimator: EstimatorName,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Printed,
    TotalVariance,
}

impl From<EstimatorName> for CovarianceEstimator {
    fn from(e: EstimatorName) -> Self {
        match e {
            EstimatorName::Printed => CovarianceEstimator::Printed,
            EstimatorName::TotalVariance => CovarianceEstimator::TotalVariance,
        }
    }
}

impl FitNormalCmd {
    pub fn run(&self) -> Result<()> {
        let ds = self.data.load()?;
        let model = NormalModel::fit_label(&ds, &self.label_normal, self.estimator.into())?;
        write_model(&self.out, &model, Some(&Provenance::for_config(self)))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

impl ScoreCmd {
    pub fn run(&self) -> Result<()> {
        let model = read_model(&self.model)?;
        let rows = score_dataset(&model, &self.data.load()?)?;
        write_rows(&self.out, &rows, Some(&Provenance::for_config(self)))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalOccCmd {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "NILM")]
    pub normal_label: String,
    /// Report each abnormal label against the normals.
    #[arg(long)]
    pub per_class: bool,
    /// `youden` or a numeric threshold; scores above it are abnormal.
    #[arg(long, default_value = "youden")]
    pub threshold: ThresholdRule,
    /// Write the ROC curve as `threshold,fpr,tpr` CSV.
    #[arg(long)]
    #[serde(skip)]
    pub roc_csv: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportOut,
}

impl EvalOccCmd {
    pub fn run(&self) -> Result<()> {
        let rows: Vec<ScoreRow> = read_rows(&self.scores)?;
        let r = evaluate_scores(&rows, &self.normal_label, self.per_class, self.threshold)?;
        let prov = Provenance::for_config(self);
        if let Some(path) = &self.roc_csv {
            write_text(path, &format!("{}\n{}", prov.text_line(), r.curve.to_csv()))?;
        }
        self.report.emit(&r, &prov)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrossvalCmd {
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "NILM")]
    pub normal_label: String,
    #[arg(long, value_enum, default_value_t = EstimatorName::Printed)]
    pub estimator: EstimatorName,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportOut,
}

impl CrossvalCmd {
    fn config(&self) -> CrossvalConfig {
        CrossvalConfig {
            folds: self.folds,
            normal_label: self.normal_label.clone(),
            seed: self.seed,
            estimator: self.estimator.into(),
        }
    }

    pub fn run(&self) -> Result<()> {
        let r = crossval_occ(&self.data.load()?, &self.config())?;
        self.report.emit(&r, &Provenance::for_config(self))
    }
}

/// Reference set for reference-based distances: every record of the input
/// (`self`) or the records of another dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Refs {
    #[serde(rename = "self")]
    SelfSet,
    File(PathBuf),
}

impl std::str::FromStr for Refs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "self" {
            Ok(Refs::SelfSet)
        } else {
            Ok(Refs::File(PathBuf::from(s)))
        }
    }
}

impl Refs {
    fn resolve(&self, ds: &Dataset) -> Result<Vec<crate::gaussian::DiagGaussian>> {
        match self {
            Refs::SelfSet => Ok(ds.posteriors()),
            Refs::File(p) => {
                let refs = read_dataset(p, Format::from_path(p))?;
                crate::error::check_dim(ds.dim(), refs.dim())?;
                Ok(refs.posteriors())
            }
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrsdMatrixCmd {
    #[command(flatten)]
    pub data: DataIn,
    /// `self` or a dataset file of reference posteriors.
    #[arg(long, default_value = "self")]
    pub refs: Refs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

impl CrsdMatrixCmd {
    pub fn run(&self) -> Result<()> {
        let ds = self.data.load()?;
        let refs = self.refs.resolve(&ds)?;
        let m = ProfileMatrix::build(&refs, &ds.posteriors())?;
        write_matrix_file(
            &self.out,
            &MatrixFile {
                rows: m.n_refs(),
                cols: m.n_targets(),
                dim: ds.dim(),
                values: m.to_row_major(),
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Agglomerative on reference-profile distances.
    AggSm,
    /// Agglomerative on Euclidean distances of the posterior means.
    AggEm,
    Kmeans,
    Dbscan,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterCmd {
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long, value_enum)]
    pub algo: Algorithm,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value = "average")]
    pub linkage: Linkage,
    #[arg(long, default_value = "self")]
    pub refs: Refs,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 5)]
    pub min_pts: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

impl ClusterCmd {
    pub fn run(&self) -> Result<()> {
        let ds = self.data.load()?;
        let assignment = match self.algo {
            Algorithm::AggSm => {
                let refs = self.refs.resolve(&ds)?;
                let dis = ProfileMatrix::build(&refs, &ds.posteriors())?.pairwise();
                cut(&agglomerative(&dis, self.linkage)?, self.k)?
            }
            Algorithm::AggEm => {
                let dis = Dissimilarity::euclidean(&ds.means(), false)?;
                cut(&agglomerative(&dis, self.linkage)?, self.k)?
            }
            Algorithm::Kmeans => kmeans(&ds.means(), &KMeansConfig::new(self.k, self.seed))?.assignment,
            Algorithm::Dbscan => dbscan(
                &ds.means(),
                &DbscanConfig {
                    eps: self.eps,
                    min_pts: self.min_pts,
                },
            )?,
        };
        let rows: Vec<LabelRow> = ds
            .records()
            .iter()
            .zip(&assignment.labels)
            .map(|(r, &cluster)| LabelRow {
                id: r.id.clone(),
                cluster,
            })
            .collect();
        write_rows(&self.out, &rows, Some(&Provenance::for_config(self)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseName {
    Singletons,
    OneCluster,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalClusterCmd {
    /// Dataset file carrying the true labels.
    #[arg(long)]
    pub truth: PathBuf,
    /// Cluster labels file.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value_t = NoiseName::Singletons)]
    pub noise: NoiseName,
    #[command(flatten)]
    pub report: ReportOut,
}

impl EvalClusterCmd {
    pub fn run(&self) -> Result<()> {
        let ds = read_dataset(&self.truth, Format::from_path(&self.truth))?;
        let pred: Vec<LabelRow> = read_rows(&self.pred)?;
        let by_id: HashMap<&str, i64> = pred.iter().map(|r| (r.id.as_str(), r.cluster)).collect();
        if by_id.len() != pred.len() {
            return Err(Error::invalid("duplicate ids in cluster labels"));
        }
        if pred.len() != ds.len() {
            return Err(Error::invalid(format!(
                "{} cluster labels for {} records",
                pred.len(),
                ds.len()
            )));
        }
        let labels = ds
            .records()
            .iter()
            .map(|r| {
                by_id
                    .get(r.id.as_str())
                    .copied()
                    .ok_or_else(|| Error::invalid("no cluster label").for_record(&r.id))
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = match self.noise {
            NoiseName::Singletons => NoiseMode::Singletons,
            NoiseName::OneCluster => NoiseMode::OneCluster,
        };
        let r = v_measure(&ds.labels(), &crate::cluster::ClusterAssignment { labels }, noise)?;
        self.report.emit(&r, &Provenance::for_config(self))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ElboAuditCmd {
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportOut,
}

impl ElboAuditCmd {
    pub fn run(&self) -> Result<()> {
        let a = audit(&self.data.load()?, self.samples, self.beta, self.seed)?;
        self.report.emit(&a, &Provenance::for_config(self))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TraverseCmd {
    #[arg(long)]
    pub model: PathBuf,
    /// `all` or a comma-separated list of indices.
    #[arg(long, default_value = "all")]
    pub dims: Dims,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

impl TraverseCmd {
    pub fn run(&self) -> Result<()> {
        let grids = traversal(&read_model(&self.model)?, &self.dims)?;
        write_rows(&self.out, &grid_rows(&grids), Some(&Provenance::for_config(self)))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyIdentitiesCmd {
    /// Random pairs per dimension.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 8])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub jsd_trials: usize,
    #[arg(long, default_value_t = 10_000)]
    pub jsd_samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportOut,
}

impl VerifyIdentitiesCmd {
    pub fn run(&self) -> Result<()> {
        let r = verify_identities(&IdentityConfig {
            trials: self.trials,
            dims: self.dims.clone(),
            jsd_trials: self.jsd_trials,
            jsd_samples: self.jsd_samples,
            seed: self.seed,
        })?;
        self.report.emit(&r, &Provenance::for_config(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub beta: u32,
    pub dim: usize,
    pub aug: String,
    pub file: String,
    /// Absent when the file does not exist.
    pub auc: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub folds: usize,
    pub normal_label: String,
    pub seed: u64,
    pub cells: Vec<SweepCell>,
}

impl Report for SweepReport {
    fn render_text(&self) -> String {
        let mut s = format!(
            "AUROC sweep: {}-fold cross-validation, normal label `{}`, seed {}\n",
            self.folds, self.normal_label, self.seed
        );
        s.push_str(&format!("{:>5} {:>5}", "beta", "dim"));
        for aug in SWEEP_AUGS {
            s.push_str(&format!(" {aug:>13}"));
        }
        s.push('\n');
        for chunk in self.cells.chunks(SWEEP_AUGS.len()) {
            s.push_str(&format!("{:>5} {:>5}", chunk[0].beta, chunk[0].dim));
            for c in chunk {
                let v = c.auc.map_or_else(|| "absent".to_string(), |m| m.to_string());
                s.push_str(&format!(" {v:>13}"));
            }
            s.push('\n');
        }
        s
    }
}

/// File name of one grid cell's embedding export.
pub fn sweep_file_name(beta: u32, dim: usize, aug: &str) -> String {
    format!("emb_b{beta}_d{dim}_{aug}.jsonl")
}

/// Cross-validated AUROC for each β × latent size × augmentation export
/// found in `dir`. Missing exports are reported as absent.
pub fn sweep(dir: &Path, cfg: &CrossvalConfig) -> Result<SweepReport> {
    let mut cells = Vec::new();
    for beta in SWEEP_BETAS {
        for dim in SWEEP_DIMS {
            for aug in SWEEP_AUGS {
                let file = sweep_file_name(beta, dim, aug);
                let path = dir.join(&file);
                let auc = if path.exists() {
                    let ds = read_dataset(&path, Format::Jsonl)?;
                    crossval_occ(&ds, cfg)
                        .map_err(|e| Error::invalid(format!("{file}: {e}")))?
                        .overall
                        .auc
                } else {
                    None
                };
                cells.push(SweepCell {
                    beta,
                    dim,
                    aug: aug.to_string(),
                    file,
                    auc,
                });
            }
        }
    }
    Ok(SweepReport {
        folds: cfg.folds,
        normal_label: cfg.normal_label.clone(),
        seed: cfg.seed,
        cells,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepCmd {
    /// Directory holding `emb_b{beta}_d{dim}_{aug}.jsonl` exports.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "NILM")]
    pub normal_label: String,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportOut,
}

impl SweepCmd {
    pub fn run(&self) -> Result<()> {
        let cfg = CrossvalConfig {
            folds: self.folds,
            normal_label: self.normal_label.clone(),
            seed: self.seed,
            estimator: CovarianceEstimator::Printed,
        };
        let r = sweep(&self.dir, &cfg)?;
        self.report.emit(&r, &Provenance::for_config(self))
    }
}

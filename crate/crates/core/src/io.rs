//! Embedding interchange formats, dataset validation, fold splitting and
//! persistence of models, scores, labels, grids and distance matrices.
//!
//! JSONL is the primary format, one posterior per line:
//!
//! ```text
//! {"id": "cell-0001", "label": "NILM", "mu": [0.1, -0.3], "logvar": [-1.2, -0.8]}
//! ```
//!
//! The CSV twin uses the header `id,label,mu_0..mu_{d-1},logvar_0..logvar_{d-1}`.
//! Every JSONL artifact written here may start with a single
//! `{"_provenance": {...}}` line, which all readers skip.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaussian::{DiagGaussian, FullGaussian};
use crate::occ::{CovarianceEstimator, NormalModel};

pub const MODEL_VERSION: &str = "latent-occ-model/1";
pub const TOOL_NAME: &str = "latent-occ";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const PROVENANCE_KEY: &str = "_provenance";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub label: String,
    pub posterior: DiagGaussian,
}

/// A non-empty, validated collection of records sharing one latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<EmbeddingRecord>,
    dim: usize,
}

impl Dataset {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::invalid("dataset is empty"))?;
        let dim = first.posterior.dim();
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.id.is_empty() {
                return Err(Error::invalid("record with empty id"));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Record {
                    id: r.id.clone(),
                    msg: "duplicate id".into(),
                });
            }
            if r.posterior.dim() != dim {
                return Err(Error::Record {
                    id: r.id.clone(),
                    msg: format!("dimension {} differs from dataset dimension {dim}", r.posterior.dim()),
                });
            }
        }
        Ok(Self { records, dim })
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn posteriors(&self) -> Vec<DiagGaussian> {
        self.records.iter().map(|r| r.posterior.clone()).collect()
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.posterior.mean().to_vec()).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.label.as_str()).collect()
    }

    /// Distinct labels in sorted order.
    pub fn label_set(&self) -> Vec<String> {
        let mut v: Vec<String> = self.records.iter().map(|r| r.label.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn with_label(&self, label: &str) -> Vec<&EmbeddingRecord> {
        self.records.iter().filter(|r| r.label == label).collect()
    }

    /// Sub-dataset of the given record indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guess from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::invalid(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct RawRecord {
    id: String,
    label: String,
    mu: Vec<f64>,
    logvar: Vec<f64>,
}

fn to_record(raw: RawRecord, line: usize) -> Result<EmbeddingRecord> {
    if raw.mu.len() != raw.logvar.len() {
        return Err(Error::Record {
            id: raw.id,
            msg: format!(
                "line {line}: mu has {} entries but logvar has {}",
                raw.mu.len(),
                raw.logvar.len()
            ),
        });
    }
    match DiagGaussian::from_logvar(raw.mu, &raw.logvar) {
        Ok(posterior) => Ok(EmbeddingRecord {
            id: raw.id,
            label: raw.label,
            posterior,
        }),
        Err(e) => Err(Error::Record {
            id: raw.id,
            msg: format!("line {line}: {e}"),
        }),
    }
}

/// Records are collected first so that ragged dimensions and duplicates are
/// reported against the offending line.
fn validate_records(parsed: Vec<(usize, EmbeddingRecord)>) -> Result<Dataset> {
    let Some((_, first)) = parsed.first() else {
        return Err(Error::invalid("dataset is empty"));
    };
    let dim = first.posterior.dim();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (line, r) in &parsed {
        if let Some(prev) = seen.insert(r.id.as_str(), *line) {
            return Err(Error::Record {
                id: r.id.clone(),
                msg: format!("line {line}: duplicate id (first seen on line {prev})"),
            });
        }
        if r.posterior.dim() != dim {
            return Err(Error::Record {
                id: r.id.clone(),
                msg: format!(
                    "line {line}: dimension {} differs from dataset dimension {dim}",
                    r.posterior.dim()
                ),
            });
        }
    }
    Dataset::new(parsed.into_iter().map(|(_, r)| r).collect())
}

fn is_provenance_line(line: &str) -> bool {
    line.trim_start().starts_with(&format!("{{\"{PROVENANCE_KEY}\""))
}

/// Iterate `(line_number, json_text)` over non-blank, non-provenance lines.
fn jsonl_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })),
            Ok(l) if l.trim().is_empty() || is_provenance_line(&l) => None,
            Ok(l) => Some(Ok((i + 1, l))),
        })
}

pub fn parse_jsonl<R: Read>(reader: R) -> Result<Dataset> {
    let mut parsed = Vec::new();
    for item in jsonl_lines(BufReader::new(reader)) {
        let (line, text) = item?;
        let raw: RawRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        parsed.push((line, to_record(raw, line)?));
    }
    validate_records(parsed)
}

pub fn parse_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let dim = csv_dim(&header)?;
    let mut parsed = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 2 + 2 * dim {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", 2 + 2 * dim, row.len()),
            });
        }
        let num = |k: usize| -> Result<f64> {
            row[k].parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("column `{}`: {e}", &header[k]),
            })
        };
        let mu = (0..dim).map(|j| num(2 + j)).collect::<Result<Vec<_>>>()?;
        let logvar = (0..dim).map(|j| num(2 + dim + j)).collect::<Result<Vec<_>>>()?;
        let raw = RawRecord {
            id: row[0].to_string(),
            label: row[1].to_string(),
            mu,
            logvar,
        };
        parsed.push((line, to_record(raw, line)?));
    }
    validate_records(parsed)
}

fn csv_dim(header: &csv::StringRecord) -> Result<usize> {
    let bad = |msg: String| Error::Parse { line: 1, msg };
    if header.len() < 4 || !(header.len() - 2).is_multiple_of(2) {
        return Err(bad(format!("header has {} columns", header.len())));
    }
    if &header[0] != "id" || &header[1] != "label" {
        return Err(bad("header must start with `id,label`".into()));
    }
    let dim = (header.len() - 2) / 2;
    for j in 0..dim {
        if header[2 + j] != format!("mu_{j}") || header[2 + dim + j] != format!("logvar_{j}") {
            return Err(bad(format!("unexpected column order near index {}", 2 + j)));
        }
    }
    Ok(dim)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let f = open(path)?;
    match format {
        Format::Jsonl => parse_jsonl(f),
        Format::Csv => parse_csv(f),
    }
}

pub fn write_jsonl<W: Write>(mut w: W, ds: &Dataset, prov: Option<&Provenance>) -> std::io::Result<()> {
    if let Some(p) = prov {
        writeln!(w, "{}", p.jsonl_line())?;
    }
    for r in ds.records() {
        let raw = RawRecord {
            id: r.id.clone(),
            label: r.label.clone(),
            mu: r.posterior.mean().to_vec(),
            logvar: r.posterior.logvar(),
        };
        writeln!(w, "{}", serde_json::to_string(&raw).expect("record serializes"))?;
    }
    w.flush()
}

pub fn write_csv<W: Write>(w: W, ds: &Dataset) -> Result<()> {
    let d = ds.dim();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..d).map(|j| format!("mu_{j}")));
    header.extend((0..d).map(|j| format!("logvar_{j}")));
    let csv_err = |e: csv::Error| Error::invalid(e.to_string());
    wtr.write_record(&header).map_err(csv_err)?;
    for r in ds.records() {
        let mut row = vec![r.id.clone(), r.label.clone()];
        row.extend(r.posterior.mean().iter().map(|v| v.to_string()));
        row.extend(r.posterior.logvar().iter().map(|v| v.to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::invalid(e.to_string()))
}

pub fn write_dataset(path: &Path, ds: &Dataset, format: Format, prov: Option<&Provenance>) -> Result<()> {
    let w = create(path)?;
    match format {
        Format::Jsonl => write_jsonl(w, ds, prov).map_err(|e| Error::io(path, e)),
        Format::Csv => write_csv(w, ds),
    }
}

/// Assignment of every record to one of `fold_count` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldSplit {
    pub fold_count: usize,
    /// Fold index per record, aligned with dataset order.
    pub assignments: Vec<usize>,
    /// Labels with fewer members than `fold_count`.
    pub undersized_labels: Vec<String>,
}

impl FoldSplit {
    pub fn fold_of(&self, record: usize) -> usize {
        self.assignments[record]
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Label-stratified k-fold split. Each stratum is shuffled with the seed and
/// the concatenated strata are dealt round-robin, so fold sizes differ by at
/// most one both overall and within each label.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldSplit> {
    if k == 0 {
        return Err(Error::invalid("fold count must be positive"));
    }
    if k > ds.len() {
        return Err(Error::invalid(format!(
            "fold count {k} exceeds dataset size {}",
            ds.len()
        )));
    }
    let mut strata: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.records().iter().enumerate() {
        strata.entry(r.label.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; ds.len()];
    let mut undersized_labels = Vec::new();
    let mut cursor = 0usize;
    for (label, mut members) in strata {
        if members.len() < k {
            undersized_labels.push(label.to_string());
        }
        members.shuffle(&mut rng);
        for idx in members {
            assignments[idx] = cursor % k;
            cursor += 1;
        }
    }
    Ok(FoldSplit {
        fold_count: k,
        assignments,
        undersized_labels,
    })
}

/// Tool version plus a hash of the configuration that produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn for_config<C: Serialize>(config: &C) -> Self {
        let json = serde_json::to_string(config).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config_hash: hash,
        }
    }

    pub fn jsonl_line(&self) -> String {
        serde_json::json!({ PROVENANCE_KEY: self }).to_string()
    }

    pub fn text_line(&self) -> String {
        format!("# {} {} config={}", self.tool, self.version, self.config_hash)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: String,
    dim: usize,
    mean: Vec<f64>,
    cov_row_major: Vec<f64>,
    jitter_applied: f64,
    n_fit: usize,
    estimator: CovarianceEstimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

pub fn model_to_json(model: &NormalModel, prov: Option<&Provenance>) -> String {
    let g = model.gaussian();
    let d = g.dim();
    let cov = g.cov();
    let file = ModelFile {
        version: MODEL_VERSION.into(),
        dim: d,
        mean: g.mean().to_vec(),
        cov_row_major: (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| cov[(i, j)])
            .collect(),
        jitter_applied: g.jitter_applied(),
        n_fit: model.n_fit(),
        estimator: model.estimator(),
        provenance: prov.cloned(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<NormalModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
    let found = value
        .get("version")
        .and_then(|v| v.as_str())
        .unwrap_or("<missing>");
    if found != MODEL_VERSION {
        return Err(Error::Version {
            found: found.to_string(),
            expected: MODEL_VERSION.into(),
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    if file.mean.len() != file.dim {
        return Err(Error::invalid(format!(
            "model mean has {} entries, dim is {}",
            file.mean.len(),
            file.dim
        )));
    }
    let gaussian = FullGaussian::from_row_major(file.mean, &file.cov_row_major)?;
    if gaussian.jitter_applied().to_bits() != file.jitter_applied.to_bits() {
        return Err(Error::invalid(format!(
            "stored jitter {:e} does not reproduce (got {:e})",
            file.jitter_applied,
            gaussian.jitter_applied()
        )));
    }
    NormalModel::from_parts(gaussian, file.n_fit, file.estimator)
}

pub fn write_model(path: &Path, model: &NormalModel, prov: Option<&Provenance>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", model_to_json(model, prov))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<NormalModel> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

/// A result object that renders as a plain-text report with a JSON twin.
pub trait Report: Serialize {
    fn render_text(&self) -> String;
}

/// Writes the text report to `path` and, when `json_twin` is set, the JSON
/// serialization next to it with a `.json` suffix appended.
pub fn write_report<T: Report>(
    path: &Path,
    report: &T,
    prov: Option<&Provenance>,
    json_twin: bool,
) -> Result<()> {
    let mut w = create(path)?;
    let mut text = String::new();
    if let Some(p) = prov {
        text.push_str(&p.text_line());
        text.push('\n');
    }
    text.push_str(&report.render_text());
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))?;
    if json_twin {
        let twin = path.with_file_name(format!(
            "{}.json",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("report")
        ));
        let body = serde_json::json!({
            "provenance": prov,
            "report": report,
        });
        let mut w = create(&twin)?;
        writeln!(w, "{}", serde_json::to_string_pretty(&body).expect("report serializes"))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&twin, e))?;
    }
    Ok(())
}

/// Write any serializable rows as JSONL, optionally led by a provenance line.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], prov: Option<&Provenance>) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        if let Some(p) = prov {
            writeln!(w, "{}", p.jsonl_line())?;
        }
        for r in rows {
            writeln!(w, "{}", serde_json::to_string(r).expect("row serializes"))?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = open(path)?;
    let mut out = Vec::new();
    for item in jsonl_lines(BufReader::new(f)) {
        let (line, text) = item?;
        out.push(serde_json::from_str(&text).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// One line of a scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub label: String,
    pub score: f64,
}

/// One line of a cluster-labels file. Noise points carry cluster −1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub cluster: i64,
}

/// One line of a traversal-grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub dim: usize,
    pub step: usize,
    pub z: Vec<f64>,
}

pub const MATRIX_MAGIC: f64 = 1_129_468_740.0; // b"CRSD" as a big-endian u32
pub const MATRIX_VERSION: f64 = 1.0;

/// Row-major `m × n` binary64 matrix with its header values.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

/// Little-endian binary64: an 8-entry header (magic, version, m, n, d,
/// three reserved zeros) followed by the m·n values in row-major order.
pub fn write_matrix<W: Write>(mut w: W, m: &MatrixFile) -> std::io::Result<()> {
    let header = [
        MATRIX_MAGIC,
        MATRIX_VERSION,
        m.rows as f64,
        m.cols as f64,
        m.dim as f64,
        0.0,
        0.0,
        0.0,
    ];
    for v in header.iter().chain(&m.values) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<MatrixFile> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::invalid(e.to_string()))?;
    if bytes.len() % 8 != 0 || bytes.len() < 64 {
        return Err(Error::invalid("matrix file is truncated"));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if vals[0] != MATRIX_MAGIC {
        return Err(Error::invalid("bad matrix magic"));
    }
    if vals[1] != MATRIX_VERSION {
        return Err(Error::Version {
            found: vals[1].to_string(),
            expected: MATRIX_VERSION.to_string(),
        });
    }
    let (rows, cols, dim) = (vals[2] as usize, vals[3] as usize, vals[4] as usize);
    if vals.len() - 8 != rows * cols {
        return Err(Error::invalid(format!(
            "matrix header says {rows}x{cols} but file holds {} values",
            vals.len() - 8
        )));
    }
    Ok(MatrixFile {
        rows,
        cols,
        dim,
        values: vals[8..].to_vec(),
    })
}

pub fn write_matrix_file(path: &Path, m: &MatrixFile) -> Result<()> {
    let w = create(path)?;
    write_matrix(w, m).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_file(path: &Path) -> Result<MatrixFile> {
    read_matrix(open(path)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, label: &str, mu: Vec<f64>, var: Vec<f64>) -> EmbeddingRecord {
        EmbeddingRecord {
            id: id.into(),
            label: label.into(),
            posterior: DiagGaussian::new(mu, var).unwrap(),
        }
    }

    const THREE: &str = r#"{"id": "a", "label": "NILM", "mu": [0.0, 1.0], "logvar": [0.0, -1.0]}
{"id": "b", "label": "SCC", "mu": [0.5, 1.5], "logvar": [0.1, -0.5]}

{"id": "c", "label": "NILM", "mu": [-0.5, 0.25], "logvar": [-2.0, 0.3]}
"#;

    #[test]
    fn reads_three_line_jsonl() {
        let ds = parse_jsonl(THREE.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.records()[1].label, "SCC");
        assert_eq!(ds.records()[2].posterior.var()[0], (-2.0f64).exp());
    }

    #[test]
    fn zero_variance_names_record() {
        let text = r#"{"id": "ok", "label": "NILM", "mu": [0.0], "logvar": [0.0]}
{"id": "bad-7", "label": "NILM", "mu": [0.0], "logvar": [-1000.0]}"#;
        match parse_jsonl(text.as_bytes()) {
            Err(Error::Record { id, msg }) => {
                assert_eq!(id, "bad-7");
                assert!(msg.contains("line 2"), "{msg}");
            }
            other => panic!("expected record error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_are_diagnosed() {
        let dup = r#"{"id": "a", "label": "x", "mu": [0.0], "logvar": [0.0]}
{"id": "a", "label": "x", "mu": [1.0], "logvar": [0.0]}"#;
        assert!(matches!(parse_jsonl(dup.as_bytes()), Err(Error::Record { id, .. }) if id == "a"));

        let ragged = r#"{"id": "a", "label": "x", "mu": [0.0], "logvar": [0.0]}
{"id": "b", "label": "x", "mu": [1.0, 2.0], "logvar": [0.0, 0.0]}"#;
        assert!(matches!(parse_jsonl(ragged.as_bytes()), Err(Error::Record { id, .. }) if id == "b"));

        let uneven = r#"{"id": "a", "label": "x", "mu": [0.0, 1.0], "logvar": [0.0]}"#;
        assert!(matches!(parse_jsonl(uneven.as_bytes()), Err(Error::Record { .. })));

        let broken = "{\"id\": \"a\", \"label\": \"x\", \"mu\": [0.0], \"logvar\": [0.0]}\n{not json";
        assert!(matches!(parse_jsonl(broken.as_bytes()), Err(Error::Parse { line: 2, .. })));

        let missing = r#"{"id": "a", "label": "x", "mu": [0.0]}"#;
        assert!(matches!(parse_jsonl(missing.as_bytes()), Err(Error::Parse { line: 1, .. })));

        assert!(parse_jsonl("".as_bytes()).is_err());
        assert!(parse_csv("id,label,mu_0,logvar_0\n".as_bytes()).is_err());
        assert!(parse_csv("id,label,mu_0,logvar_1\na,x,0,0\n".as_bytes()).is_err());
        assert!(matches!(
            parse_csv("id,label,mu_0,logvar_0\na,x,zero,0\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv("id,label,mu_0,logvar_0\na,x,0,-inf\n".as_bytes()),
            Err(Error::Record { .. })
        ));
    }

    #[test]
    fn csv_and_jsonl_agree() {
        let csv_text = "id,label,mu_0,mu_1,logvar_0,logvar_1\n\
                        a,NILM,0.0,1.0,0.0,-1.0\n\
                        b,SCC,0.5,1.5,0.1,-0.5\n\
                        c,NILM,-0.5,0.25,-2.0,0.3\n";
        let from_csv = parse_csv(csv_text.as_bytes()).unwrap();
        let from_jsonl = parse_jsonl(THREE.as_bytes()).unwrap();
        assert_eq!(from_csv, from_jsonl);

        let mut buf = Vec::new();
        write_csv(&mut buf, &from_jsonl).unwrap();
        assert_eq!(parse_csv(buf.as_slice()).unwrap().means(), from_jsonl.means());
    }

    #[test]
    fn provenance_line_is_skipped() {
        let ds = parse_jsonl(THREE.as_bytes()).unwrap();
        let prov = Provenance::for_config(&"cfg");
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &ds, Some(&prov)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("{\"_provenance\""));
        let back = parse_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.means(), ds.means());
        assert_eq!(back.len(), 3);
    }

    fn labelled(counts: &[(&str, usize)]) -> Dataset {
        let mut recs = Vec::new();
        for (label, n) in counts {
            for i in 0..*n {
                recs.push(rec(&format!("{label}-{i}"), label, vec![i as f64], vec![1.0]));
            }
        }
        Dataset::new(recs).unwrap()
    }

    #[test]
    fn kfold_single_label() {
        let ds = labelled(&[("NILM", 10)]);
        let split = stratified_kfold(&ds, 5, 3).unwrap();
        assert_eq!(split.fold_sizes(), vec![2; 5]);
        assert!(split.undersized_labels.is_empty());
    }

    #[test]
    fn kfold_stratifies_by_brute_force_tally() {
        let ds = labelled(&[("NILM", 80), ("ABN", 20)]);
        let split = stratified_kfold(&ds, 5, 42).unwrap();
        let mut tally = BTreeMap::new();
        for (i, r) in ds.records().iter().enumerate() {
            *tally.entry((split.fold_of(i), r.label.clone())).or_insert(0) += 1;
        }
        for f in 0..5 {
            assert_eq!(tally[&(f, "NILM".to_string())], 16);
            assert_eq!(tally[&(f, "ABN".to_string())], 4);
        }
    }

    #[test]
    fn kfold_determinism_and_edges() {
        let ds = labelled(&[("A", 13), ("B", 7), ("C", 2)]);
        let a = stratified_kfold(&ds, 4, 9).unwrap();
        assert_eq!(a, stratified_kfold(&ds, 4, 9).unwrap());
        assert_ne!(a, stratified_kfold(&ds, 4, 10).unwrap());
        assert_eq!(a.undersized_labels, vec!["C".to_string()]);
        let sizes = a.fold_sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

        let one = stratified_kfold(&ds, 1, 0).unwrap();
        assert!(one.assignments.iter().all(|&f| f == 0));
        assert!(stratified_kfold(&ds, 23, 0).is_err());
        assert!(stratified_kfold(&ds, 0, 0).is_err());
    }

    #[test]
    fn matrix_header_roundtrip() {
        let m = MatrixFile {
            rows: 2,
            cols: 3,
            dim: 4,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, f64::MIN_POSITIVE],
        };
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 8 * (8 + 6));
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
        buf[8] ^= 0xff;
        assert!(read_matrix(buf.as_slice()).is_err());
        assert!(read_matrix(&buf[..60]).is_err());
    }
}

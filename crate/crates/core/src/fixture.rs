//! Synthetic posterior datasets standing in for encoder output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{DiagGaussian, VAR_FLOOR};
use crate::io::{Dataset, EmbeddingRecord};

pub const NORMAL_LABEL: &str = "NILM";
pub const ABNORMAL_LABEL: &str = "ABN";
/// Default posterior variance range of the k-blobs preset.
pub const BLOB_VAR_LOW: f64 = 0.1;
pub const BLOB_VAR_HIGH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    /// `n / 2` normals with means ~ N(0, I) and variances ~ U[0.1, 0.5], the
    /// rest abnormal, shifted by `shift` along one random unit vector.
    TwoClass { n: usize, dim: usize, shift: f64 },
    /// `k` labelled clusters with centres pairwise at least `sep` apart and
    /// member means scattered by `spread` around them. Blob `c` has posterior
    /// variances near a level spaced geometrically from `var_low` to
    /// `var_high`.
    KBlobs {
        k: usize,
        n: usize,
        dim: usize,
        sep: f64,
        spread: f64,
        var_low: f64,
        var_high: f64,
    },
    /// Duplicated records, variances at the floor and a single-record label.
    Degenerate { dim: usize },
}

impl Preset {
    pub fn two_class(n: usize, dim: usize, shift: f64) -> Self {
        Self::TwoClass { n, dim, shift }
    }

    pub fn k_blobs(k: usize, n: usize, dim: usize, sep: f64) -> Self {
        Self::KBlobs {
            k,
            n,
            dim,
            sep,
            spread: 1.0,
            var_low: BLOB_VAR_LOW,
            var_high: BLOB_VAR_HIGH,
        }
    }
}

fn record(label: &str, i: usize, mean: Vec<f64>, var: Vec<f64>) -> Result<EmbeddingRecord> {
    Ok(EmbeddingRecord {
        id: format!("{}-{i:05}", label.to_lowercase()),
        label: label.to_string(),
        posterior: DiagGaussian::new(mean, var)?,
    })
}

fn normal_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v = normal_vec(d, rng);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Centres drawn from N(0, sep²·I), rejecting any closer than `sep` to an
/// earlier one.
pub fn blob_centres(k: usize, dim: usize, sep: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let mut centres: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut scale = sep;
    let mut attempts = 0;
    while centres.len() < k {
        let c: Vec<f64> = normal_vec(dim, rng).into_iter().map(|x| x * scale).collect();
        if centres
            .iter()
            .all(|o| crate::cluster::sq_dist(o, &c).sqrt() >= sep)
        {
            centres.push(c);
        }
        attempts += 1;
        if attempts % 1000 == 0 {
            scale *= 1.5;
        }
        if attempts > 100_000 {
            return Err(Error::invalid(format!("could not place {k} centres {sep} apart")));
        }
    }
    Ok(centres)
}

pub fn generate(preset: &Preset, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = match *preset {
        Preset::TwoClass { n, dim, shift } => {
            if n < 2 || dim == 0 || !shift.is_finite() {
                return Err(Error::invalid("two-class needs n >= 2, dim >= 1 and a finite shift"));
            }
            let var = Uniform::new(0.1, 0.5).expect("valid range");
            let dir = unit_vec(dim, &mut rng);
            let n_normal = n / 2;
            (0..n)
                .map(|i| {
                    let mut mean = normal_vec(dim, &mut rng);
                    let v: Vec<f64> = (0..dim).map(|_| var.sample(&mut rng)).collect();
                    if i < n_normal {
                        record(NORMAL_LABEL, i, mean, v)
                    } else {
                        for (m, u) in mean.iter_mut().zip(&dir) {
                            *m += shift * u;
                        }
                        record(ABNORMAL_LABEL, i, mean, v)
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        Preset::KBlobs {
            k,
            n,
            dim,
            sep,
            spread,
            var_low,
            var_high,
        } => {
            if k == 0 || n < k || dim == 0 {
                return Err(Error::invalid("k-blobs needs k >= 1, n >= k and dim >= 1"));
            }
            if !(sep >= 0.0 && spread >= 0.0 && var_low > 0.0 && var_high >= var_low) {
                return Err(Error::invalid("k-blobs needs sep, spread >= 0 and 0 < var_low <= var_high"));
            }
            let centres = blob_centres(k, dim, sep, &mut rng)?;
            let jitter = Uniform::new(0.8, 1.25).expect("valid range");
            let ratio = if k > 1 { (var_high / var_low).powf(1.0 / (k - 1) as f64) } else { 1.0 };
            (0..n)
                .map(|i| {
                    let c = i % k;
                    let level = var_low * ratio.powi(c as i32);
                    let mean = centres[c]
                        .iter()
                        .map(|&m| m + spread * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let var = (0..dim).map(|_| level * jitter.sample(&mut rng)).collect();
                    record(&format!("blob{c}"), i, mean, var)
                })
                .collect::<Result<Vec<_>>>()?
        }
        Preset::Degenerate { dim } => {
            if dim == 0 {
                return Err(Error::invalid("degenerate needs dim >= 1"));
            }
            let var = Uniform::new(0.1, 0.5).expect("valid range");
            let mut recs = Vec::new();
            for i in 0..8 {
                let v = (0..dim).map(|_| var.sample(&mut rng)).collect();
                recs.push(record(NORMAL_LABEL, i, normal_vec(dim, &mut rng), v)?);
            }
            // exact duplicates of the first two posteriors under new ids
            for (i, src) in [(8, 0), (9, 1)] {
                let p: &DiagGaussian = &recs[src].posterior;
                recs.push(record(NORMAL_LABEL, i, p.mean().to_vec(), p.var().to_vec())?);
            }
            recs.push(record(NORMAL_LABEL, 10, vec![0.0; dim], vec![VAR_FLOOR; dim])?);
            recs.push(record(ABNORMAL_LABEL, 11, vec![3.0; dim], vec![VAR_FLOOR; dim])?);
            recs.push(record("SOLO", 12, normal_vec(dim, &mut rng), vec![1.0; dim])?);
            recs
        }
    };
    Dataset::new(records)
}

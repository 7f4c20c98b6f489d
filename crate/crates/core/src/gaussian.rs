//! Closed-form entropies, cross-entropies and densities for multivariate
//! Gaussians with diagonal or full covariance. All quantities are in nats.
//!
//! Full covariances are factorized once at construction with a Cholesky
//! decomposition. A matrix whose smallest pivot falls below
//! [`PIVOT_RTOL`] times its mean diagonal magnitude is treated as numerically
//! indefinite and retried with diagonal jitter escalating from
//! [`JITTER_START`] to [`JITTER_MAX`] (both relative to the same scale).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// ln(2π)
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Smallest admissible posterior variance.
pub const VAR_FLOOR: f64 = 1e-12;

pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-6;
pub const PIVOT_RTOL: f64 = 1e-11;

const SYMMETRY_RTOL: f64 = 1e-10;

/// A Gaussian with diagonal covariance, e.g. a VAE posterior q(z|x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::invalid("gaussian must have dimension >= 1"));
        }
        check_dim(mean.len(), var.len())?;
        if let Some(j) = mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::invalid(format!("mean[{j}] is not finite")));
        }
        for (j, &v) in var.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("var[{j}] is not finite")));
            }
            if v < VAR_FLOOR {
                return Err(Error::invalid(format!(
                    "var[{j}] = {v:e} is below the floor {VAR_FLOOR:e}"
                )));
            }
        }
        Ok(Self { mean, var })
    }

    /// Build from a mean and log-variance, the usual encoder output.
    pub fn from_logvar(mean: Vec<f64>, logvar: &[f64]) -> Result<Self> {
        if let Some(j) = logvar.iter().position(|l| l.is_nan()) {
            return Err(Error::invalid(format!("logvar[{j}] is NaN")));
        }
        Self::new(mean, logvar.iter().map(|l| l.exp()).collect())
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, vec![var; d])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn logvar(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.ln()).collect()
    }

    pub fn entropy(&self) -> f64 {
        0.5 * self.var.iter().map(|v| 1.0 + LN_2PI + v.ln()).sum::<f64>()
    }

    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        Ok(self.log_density_unchecked(z))
    }

    pub(crate) fn log_density_unchecked(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&x, &m), &v) in z.iter().zip(&self.mean).zip(&self.var) {
            let d = x - m;
            acc += LN_2PI + v.ln() + d * d / v;
        }
        -0.5 * acc
    }

    /// Draw z = μ + σ·ε with ε ~ N(0, I).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .map(|(&m, &v)| {
                let eps: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * eps
            })
            .collect()
    }

    pub fn to_full(&self) -> Result<FullGaussian> {
        FullGaussian::new(
            self.mean.clone(),
            DMatrix::from_diagonal(&DVector::from_column_slice(&self.var)),
        )
    }
}

/// A Gaussian with full covariance and a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct FullGaussian {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    precision: DMatrix<f64>,
    log_det: f64,
}

impl FullGaussian {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("gaussian must have dimension >= 1"));
        }
        if !cov.is_square() {
            return Err(Error::invalid(format!(
                "covariance is {}x{}, not square",
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_dim(d, cov.nrows())?;
        if let Some(j) = mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::invalid(format!("mean[{j}] is not finite")));
        }
        let cov = symmetrize(cov)?;
        let (chol, jitter) = factorize(&cov)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|l| l.ln()).sum::<f64>();
        let precision = chol.inverse();
        Ok(Self {
            mean,
            cov,
            jitter,
            chol,
            precision,
            log_det,
        })
    }

    pub fn from_row_major(mean: Vec<f64>, cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::invalid(format!(
                "covariance has {} entries, expected {}",
                cov.len(),
                d * d
            )));
        }
        Self::new(mean, DMatrix::from_row_slice(d, d, cov))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Covariance as supplied (symmetrized), without jitter.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Covariance that was actually factorized.
    pub fn effective_cov(&self) -> DMatrix<f64> {
        let mut c = self.cov.clone();
        for i in 0..self.dim() {
            c[(i, i)] += self.jitter;
        }
        c
    }

    /// Absolute diagonal jitter added before factorization; 0 if none was needed.
    pub fn jitter_applied(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn entropy(&self) -> f64 {
        0.5 * (self.dim() as f64 * (1.0 + LN_2PI) + self.log_det)
    }

    /// (z − μ)ᵀ Σ⁻¹ (z − μ)
    pub fn mahalanobis_sq(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        let diff: Vec<f64> = z.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        Ok(self.quad_form(&diff))
    }

    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        let q = self.mahalanobis_sq(z)?;
        Ok(-0.5 * (self.dim() as f64 * LN_2PI + self.log_det + q))
    }

    fn quad_form(&self, diff: &[f64]) -> f64 {
        let mut y = DVector::from_column_slice(diff);
        // L is lower triangular; only its lower part is populated by `l_dirty`.
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        y.norm_squared()
    }
}

fn symmetrize(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance has non-finite entries"));
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = cov.clone();
    for i in 0..d {
        for j in (i + 1)..d {
            let (a, b) = (cov[(i, j)], cov[(j, i)]);
            if (a - b).abs() > SYMMETRY_RTOL * scale {
                return Err(Error::invalid(format!(
                    "covariance is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
            let m = 0.5 * (a + b);
            out[(i, j)] = m;
            out[(j, i)] = m;
        }
    }
    Ok(out)
}

/// Cholesky with the jitter escalation policy. Returns the factor and the
/// absolute jitter that was added to the diagonal.
pub(crate) fn factorize(cov: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let d = cov.nrows();
    let scale = cov.diagonal().iter().map(|v| v.abs()).sum::<f64>() / d as f64;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Singular {
            context: "covariance diagonal is zero".into(),
            jitter: 0.0,
        });
    }
    let accept = |c: &Cholesky<f64, Dyn>| {
        c.l_dirty()
            .diagonal()
            .iter()
            .all(|l| l * l > PIVOT_RTOL * scale)
    };
    if let Some(c) = Cholesky::new(cov.clone()) {
        if accept(&c) {
            return Ok((c, 0.0));
        }
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut m = cov.clone();
        for i in 0..d {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            if accept(&c) {
                return Ok((c, jitter));
            }
        }
        rel *= 10.0;
    }
    Err(Error::Singular {
        context: format!("{d}x{d} covariance"),
        jitter: JITTER_MAX * scale,
    })
}

/// Borrowed view over either covariance structure.
#[derive(Debug, Clone, Copy)]
pub enum GaussianRef<'a> {
    Diag(&'a DiagGaussian),
    Full(&'a FullGaussian),
}

impl<'a> From<&'a DiagGaussian> for GaussianRef<'a> {
    fn from(g: &'a DiagGaussian) -> Self {
        GaussianRef::Diag(g)
    }
}

impl<'a> From<&'a FullGaussian> for GaussianRef<'a> {
    fn from(g: &'a FullGaussian) -> Self {
        GaussianRef::Full(g)
    }
}

impl GaussianRef<'_> {
    pub fn dim(&self) -> usize {
        match self {
            GaussianRef::Diag(g) => g.dim(),
            GaussianRef::Full(g) => g.dim(),
        }
    }

    fn mean(&self) -> &[f64] {
        match self {
            GaussianRef::Diag(g) => g.mean(),
            GaussianRef::Full(g) => g.mean(),
        }
    }

    fn same_params(&self, other: &GaussianRef<'_>) -> bool {
        match (self, other) {
            (GaussianRef::Diag(a), GaussianRef::Diag(b)) => a == b,
            (GaussianRef::Full(a), GaussianRef::Full(b)) => {
                a.mean == b.mean && a.cov == b.cov && a.jitter == b.jitter
            }
            _ => false,
        }
    }
}

pub fn entropy<'a>(p: impl Into<GaussianRef<'a>>) -> f64 {
    match p.into() {
        GaussianRef::Diag(g) => g.entropy(),
        GaussianRef::Full(g) => g.entropy(),
    }
}

/// CE(r, p) = −E_r[ln p] = H(r) + KL(r‖p).
pub fn cross_entropy<'a, 'b>(
    r: impl Into<GaussianRef<'a>>,
    p: impl Into<GaussianRef<'b>>,
) -> Result<f64> {
    let (r, p) = (r.into(), p.into());
    check_dim(r.dim(), p.dim())?;
    Ok(match (r, p) {
        (GaussianRef::Diag(r), GaussianRef::Diag(p)) => diag_cross_entropy(r, p),
        (r, GaussianRef::Diag(p)) => {
            let d = p.dim();
            let mut acc = d as f64 * LN_2PI;
            for j in 0..d {
                let delta = r.mean()[j] - p.mean[j];
                acc += p.var[j].ln() + (cov_entry(&r, j, j) + delta * delta) / p.var[j];
            }
            0.5 * acc
        }
        (r, GaussianRef::Full(p)) => {
            let d = p.dim();
            let trace = match r {
                GaussianRef::Diag(r) => (0..d).map(|j| p.precision[(j, j)] * r.var[j]).sum(),
                GaussianRef::Full(r) => {
                    let rc = r.effective_cov();
                    p.precision.component_mul(&rc).sum()
                }
            };
            let diff: Vec<f64> = r.mean().iter().zip(&p.mean).map(|(a, b)| a - b).collect();
            0.5 * (d as f64 * LN_2PI + p.log_det + trace + p.quad_form(&diff))
        }
    })
}

/// Diagonal-only fast path, used on hot loops.
#[inline]
pub fn diag_cross_entropy(r: &DiagGaussian, p: &DiagGaussian) -> f64 {
    let mut acc = 0.0;
    for j in 0..r.mean.len() {
        let delta = r.mean[j] - p.mean[j];
        let vp = p.var[j];
        acc += LN_2PI + vp.ln() + (r.var[j] + delta * delta) / vp;
    }
    0.5 * acc
}

fn cov_entry(g: &GaussianRef<'_>, i: usize, j: usize) -> f64 {
    match g {
        GaussianRef::Diag(g) => {
            if i == j {
                g.var[i]
            } else {
                0.0
            }
        }
        GaussianRef::Full(g) => g.cov[(i, j)] + if i == j { g.jitter } else { 0.0 },
    }
}

/// KL(p‖q) ≥ 0, exactly zero when the parameters coincide.
pub fn kl<'a, 'b>(p: impl Into<GaussianRef<'a>>, q: impl Into<GaussianRef<'b>>) -> Result<f64> {
    let (p, q) = (p.into(), q.into());
    check_dim(p.dim(), q.dim())?;
    if p.same_params(&q) {
        return Ok(0.0);
    }
    if let (GaussianRef::Diag(p), GaussianRef::Diag(q)) = (p, q) {
        let mut acc = 0.0;
        for j in 0..p.dim() {
            let delta = p.mean[j] - q.mean[j];
            let ratio = p.var[j] / q.var[j];
            acc += ratio - ratio.ln() - 1.0 + delta * delta / q.var[j];
        }
        return Ok(0.5 * acc);
    }
    Ok((cross_entropy(p, q)? - entropy(p)).max(0.0))
}

pub fn log_density(g: &FullGaussian, z: &[f64]) -> Result<f64> {
    g.log_density(z)
}

/// (a − b)ᵀ Σ⁻¹ (a − b), factorizing `cov` under the jitter policy.
pub fn mahalanobis_sq(a: &[f64], b: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    check_dim(a.len(), cov.nrows())?;
    if a == b {
        return Ok(0.0);
    }
    let g = FullGaussian::new(b.to_vec(), cov.clone())?;
    g.mahalanobis_sq(a)
}

//! Cross-entropy referenced statistical distance.
//!
//! For a reference distribution `r`, `d(p, q; r) = |CE(r, q) − CE(r, p)|`,
//! and for a finite reference set `R` the distance is the sum over `r ∈ R`.
//! It is a pseudometric: symmetric, non-negative, zero on `p = q` and
//! satisfying the triangle inequality, but distinct distributions can sit at
//! distance zero.
//!
//! Because every term only depends on the column of cross-entropies
//! `CE(r_i, p)` of a target, [`ProfileMatrix`] precomputes those columns once
//! and turns each pairwise distance into an L1 difference of two profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::Dissimilarity;
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{cross_entropy, diag_cross_entropy, kl, mahalanobis_sq, DiagGaussian, GaussianRef};
use crate::io::Report;

pub fn crsd<'a, 'b, 'c>(
    p: impl Into<GaussianRef<'a>>,
    q: impl Into<GaussianRef<'b>>,
    r: impl Into<GaussianRef<'c>>,
) -> Result<f64> {
    let (p, q, r) = (p.into(), q.into(), r.into());
    check_dim(p.dim(), q.dim())?;
    Ok((cross_entropy(r, q)? - cross_entropy(r, p)?).abs())
}

pub fn crsd_set(p: &DiagGaussian, q: &DiagGaussian, refs: &[DiagGaussian]) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::invalid("reference set is empty"));
    }
    check_dim(p.dim(), q.dim())?;
    for r in refs {
        check_dim(p.dim(), r.dim())?;
    }
    Ok(refs
        .iter()
        .map(|r| (diag_cross_entropy(r, q) - diag_cross_entropy(r, p)).abs())
        .sum())
}

/// Jeffreys divergence under the half-sum convention, (KL(p‖q) + KL(q‖p)) / 2.
pub fn jeffreys(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    Ok(0.5 * (kl(p, q)? + kl(q, p)?))
}

/// Cross-entropies of every target against every reference.
///
/// Stored target-major so that each target's profile is contiguous.
#[derive(Debug, Clone)]
pub struct ProfileMatrix {
    refs: usize,
    targets: usize,
    profiles: Vec<f64>,
}

impl ProfileMatrix {
    pub fn build(refs: &[DiagGaussian], targets: &[DiagGaussian]) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::invalid("reference set is empty"));
        }
        let d = refs[0].dim();
        for g in refs.iter().chain(targets) {
            check_dim(d, g.dim())?;
        }
        let m = refs.len();
        let mut profiles = vec![0.0; m * targets.len()];
        profiles
            .par_chunks_mut(m)
            .zip(targets.par_iter())
            .for_each(|(row, t)| {
                for (cell, r) in row.iter_mut().zip(refs) {
                    *cell = diag_cross_entropy(r, t);
                }
            });
        if let Some(pos) = profiles.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite cross-entropy for target {} and reference {}",
                pos / m,
                pos % m
            )));
        }
        Ok(Self {
            refs: m,
            targets: targets.len(),
            profiles,
        })
    }

    pub fn n_refs(&self) -> usize {
        self.refs
    }

    pub fn n_targets(&self) -> usize {
        self.targets
    }

    /// CE(refs[i], targets[j])
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.profiles[j * self.refs + i]
    }

    pub fn profile(&self, j: usize) -> &[f64] {
        &self.profiles[j * self.refs..(j + 1) * self.refs]
    }

    pub fn distance(&self, j: usize, k: usize) -> f64 {
        self.profile(j)
            .iter()
            .zip(self.profile(k))
            .map(|(a, b)| (b - a).abs())
            .sum()
    }

    /// Reference-major (m × n) values, the on-disk layout.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.refs * self.targets];
        for j in 0..self.targets {
            for i in 0..self.refs {
                out[i * self.targets + j] = self.value(i, j);
            }
        }
        out
    }

    /// Full pairwise CRSD matrix between targets, computed in parallel over rows.
    pub fn pairwise(&self) -> Dissimilarity {
        let n = self.targets;
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (k, cell) in row.iter_mut().enumerate() {
                if k != j {
                    *cell = self.distance(j, k);
                }
            }
        });
        Dissimilarity::from_square_unchecked(n, data)
    }
}

/// Pairwise matrix where each pair is referenced to itself, R = {p, q}.
/// Under identity covariances this is the squared Euclidean distance of the means.
pub fn pairwise_self_referenced(posteriors: &[DiagGaussian]) -> Result<Dissimilarity> {
    let n = posteriors.len();
    if n == 0 {
        return Err(Error::invalid("no posteriors"));
    }
    let d = posteriors[0].dim();
    for p in posteriors {
        check_dim(d, p.dim())?;
    }
    let self_ce: Vec<f64> = posteriors.iter().map(|p| diag_cross_entropy(p, p)).collect();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j {
                let (p, q) = (&posteriors[i], &posteriors[j]);
                *cell = (diag_cross_entropy(p, q) - self_ce[i]).abs()
                    + (self_ce[j] - diag_cross_entropy(q, p)).abs();
            }
        }
    });
    // Each entry sums the same two terms in the same order from either side.
    Ok(Dissimilarity::from_square_unchecked(n, data))
}

/// Monte-Carlo Jensen–Shannon divergence with paired sampling: each of the
/// `samples` draws takes one point from `p` and one from `q`. Returns the
/// estimate and its standard error.
pub fn jsd_monte_carlo<R: Rng + ?Sized>(
    p: &DiagGaussian,
    q: &DiagGaussian,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_dim(p.dim(), q.dim())?;
    if samples < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let ln2 = std::f64::consts::LN_2;
    let log_mix = |a: f64, b: f64| {
        let m = a.max(b);
        m + ((a - m).exp() + (b - m).exp()).ln() - ln2
    };
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let x = p.sample(rng);
        let y = q.sample(rng);
        let (px, qx) = (p.log_density_unchecked(&x), q.log_density_unchecked(&x));
        let (py, qy) = (p.log_density_unchecked(&y), q.log_density_unchecked(&y));
        let v = 0.5 * ((px - log_mix(px, qx)) + (qy - log_mix(py, qy)));
        s += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Random diagonal Gaussian with means ~ N(0, 1) and variances ~ U[0.2, 2].
pub fn random_diag<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DiagGaussian {
    let var = Uniform::new(0.2, 2.0).expect("valid range");
    let mean = (0..d).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    DiagGaussian::new(mean, (0..d).map(|_| var.sample(rng)).collect()).expect("valid gaussian")
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub relation: String,
    pub trials: usize,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JsdBoundCheck {
    pub trials: usize,
    pub samples: usize,
    /// Trials where d(p,q;{p,q}) ≥ 4·(JSD − 3·SE).
    pub holds: usize,
    /// Smallest value of d − 4·(JSD − 3·SE) seen.
    pub min_margin: f64,
    /// Largest value of 4·JSD / d seen (≤ 1 whenever the bound is tight).
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub identities: Vec<IdentityCheck>,
    pub jsd_bound: JsdBoundCheck,
    pub jeffreys_convention: String,
}

impl IdentityReport {
    pub fn max_violation(&self, name: &str) -> Option<f64> {
        self.identities
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.max_violation)
    }
}

impl Report for IdentityReport {
    fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("reference-distance identities (seed {}, dims {:?})\n", self.seed, self.dims));
        s.push_str(&format!("{:<12} {:>8} {:>14}  relation\n", "identity", "trials", "max_violation"));
        for c in &self.identities {
            s.push_str(&format!(
                "{:<12} {:>8} {:>14.3e}  {}\n",
                c.name, c.trials, c.max_violation, c.relation
            ));
        }
        let j = &self.jsd_bound;
        s.push_str(&format!(
            "jsd-bound    {:>8} holds={} min_margin={:.6} max_ratio={:.6} (samples {})\n",
            j.trials, j.holds, j.min_margin, j.max_ratio, j.samples
        ));
        s.push_str(&format!("jeffreys convention: {}\n", self.jeffreys_convention));
        s
    }
}

pub struct IdentityConfig {
    pub trials: usize,
    pub dims: Vec<usize>,
    pub jsd_trials: usize,
    pub jsd_samples: usize,
    pub seed: u64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            dims: vec![1, 8],
            jsd_trials: 100,
            jsd_samples: 10_000,
            seed: 0,
        }
    }
}

/// Checks the relations between the reference distance and KL, Jeffreys,
/// Jensen–Shannon, Mahalanobis and Euclidean distances on random Gaussians.
/// `trials` pairs are drawn per dimension.
pub fn verify_identities(cfg: &IdentityConfig) -> Result<IdentityReport> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    if cfg.dims.is_empty() || cfg.dims.contains(&0) {
        return Err(Error::invalid("dims must be non-empty and positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut kl_v: f64 = 0.0;
    let mut jeff_v: f64 = 0.0;
    let mut maha_v: f64 = 0.0;
    let mut eucl_v: f64 = 0.0;
    for &d in &cfg.dims {
        for _ in 0..cfg.trials {
            let p = random_diag(d, &mut rng);
            let q = random_diag(d, &mut rng);
            let pair = [p.clone(), q.clone()];

            kl_v = kl_v.max((crsd(&p, &q, &p)? - kl(&p, &q)?).abs());

            let two_sided = crsd_set(&p, &q, &pair)?;
            jeff_v = jeff_v.max((two_sided - 2.0 * jeffreys(&p, &q)?).abs());

            let shared = random_diag(d, &mut rng);
            let ps = DiagGaussian::new(p.mean().to_vec(), shared.var().to_vec())?;
            let qs = DiagGaussian::new(q.mean().to_vec(), shared.var().to_vec())?;
            let cov = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(shared.var()));
            let lhs = crsd_set(&ps, &qs, &[ps.clone(), qs.clone()])?;
            maha_v = maha_v.max((lhs - mahalanobis_sq(ps.mean(), qs.mean(), &cov)?).abs());

            let pi = DiagGaussian::new(p.mean().to_vec(), vec![1.0; d])?;
            let qi = DiagGaussian::new(q.mean().to_vec(), vec![1.0; d])?;
            let lhs = crsd_set(&pi, &qi, &[pi.clone(), qi.clone()])?;
            let sq: f64 = pi.mean().iter().zip(qi.mean()).map(|(a, b)| (a - b) * (a - b)).sum();
            eucl_v = eucl_v.max((lhs - sq).abs());
        }
    }
    let total = cfg.trials * cfg.dims.len();
    let identities = vec![
        IdentityCheck {
            name: "kl".into(),
            relation: "d(p,q;p) = KL(p||q)".into(),
            trials: total,
            max_violation: kl_v,
        },
        IdentityCheck {
            name: "jeffreys".into(),
            relation: "d(p,q;{p,q}) = 2 D_J(p,q)".into(),
            trials: total,
            max_violation: jeff_v,
        },
        IdentityCheck {
            name: "mahalanobis".into(),
            relation: "equal covariances: d(p,q;{p,q}) = (mu_p-mu_q)' S^-1 (mu_p-mu_q)".into(),
            trials: total,
            max_violation: maha_v,
        },
        IdentityCheck {
            name: "euclidean".into(),
            relation: "identity covariances: d(p,q;{p,q}) = ||mu_p-mu_q||^2".into(),
            trials: total,
            max_violation: eucl_v,
        },
    ];

    let mut holds = 0;
    let mut min_margin = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for t in 0..cfg.jsd_trials {
        let d = cfg.dims[t % cfg.dims.len()];
        let p = random_diag(d, &mut rng);
        let q = random_diag(d, &mut rng);
        let lhs = crsd_set(&p, &q, &[p.clone(), q.clone()])?;
        let (jsd, se) = jsd_monte_carlo(&p, &q, cfg.jsd_samples, &mut rng)?;
        let margin = lhs - 4.0 * (jsd - 3.0 * se);
        if margin >= 0.0 {
            holds += 1;
        }
        min_margin = min_margin.min(margin);
        if lhs > 0.0 {
            max_ratio = max_ratio.max(4.0 * jsd / lhs);
        }
    }
    Ok(IdentityReport {
        seed: cfg.seed,
        dims: cfg.dims.clone(),
        identities,
        jsd_bound: JsdBoundCheck {
            trials: cfg.jsd_trials,
            samples: cfg.jsd_samples,
            holds,
            min_margin,
            max_ratio,
        },
        jeffreys_convention: "D_J = (KL(p||q) + KL(q||p)) / 2; under the sum convention the relation reads d = D_J".into(),
    })
}

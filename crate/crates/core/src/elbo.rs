use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{kl, DiagGaussian, LN_2PI};
use crate::io::{Dataset, Report};

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Latent-side ELBO terms of a stored set of posteriors.
///
/// The aggregate posterior q(z) is the uniform mixture of the stored
/// posteriors. `mutual_info + total_correlation + dimwise_kl` equals the
/// Monte-Carlo KL to the prior sample by sample, and the KL estimate agrees
/// with the closed form in expectation; `residual` measures the latter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElboAudit {
    pub n_records: usize,
    pub dim: usize,
    pub samples_per_point: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Monte-Carlo estimate of the mean KL(q(z|x) ‖ p(z)).
    pub kl_to_prior: Estimate,
    /// Mean over records of the closed-form KL(q(z|x) ‖ p(z)).
    pub kl_closed_form: f64,
    pub mutual_info: Estimate,
    pub total_correlation: Estimate,
    pub dimwise_kl: Estimate,
    /// `mutual_info + total_correlation + dimwise_kl − kl_closed_form`, with
    /// the standard error of the per-sample difference.
    pub residual: Estimate,
    /// Root-sum-square of the three term standard errors.
    pub combined_se: f64,
}

/// Per-record constants for fast evaluation of all component densities.
struct Component {
    mean: Vec<f64>,
    inv_var: Vec<f64>,
    /// −½(ln 2π + ln σ²) per dimension.
    log_norm: Vec<f64>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

const TERMS: usize = 5;
const MI: usize = 0;
const TC: usize = 1;
const DW: usize = 2;
const KL_MC: usize = 3;
const RESID: usize = 4;

/// Sample means and (unbiased) sample variances of the terms at one record.
struct PointStats {
    mean: [f64; TERMS],
    var: [f64; TERMS],
}

fn point_terms(
    i: usize,
    comps: &[Component],
    post: &DiagGaussian,
    kl_closed: f64,
    samples: usize,
    seed: u64,
) -> PointStats {
    let n = comps.len();
    let d = post.dim();
    let ln_n = (n as f64).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);

    let mut joint = vec![0.0; n];
    let mut per_dim = vec![0.0; n * d];
    let mut column = vec![0.0; n];
    let mut draws = vec![[0.0; TERMS]; samples];
    for draw in draws.iter_mut() {
        let z = post.sample(&mut rng);
        for (k, c) in comps.iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..d {
                let r = z[j] - c.mean[j];
                let l = c.log_norm[j] - 0.5 * r * r * c.inv_var[j];
                per_dim[k * d + j] = l;
                acc += l;
            }
            joint[k] = acc;
        }
        let log_q_cond = joint[i];
        let log_q = log_sum_exp(&joint) - ln_n;
        let mut log_marginals = 0.0;
        for j in 0..d {
            for k in 0..n {
                column[k] = per_dim[k * d + j];
            }
            log_marginals += log_sum_exp(&column) - ln_n;
        }
        let log_prior = -0.5 * z.iter().map(|x| LN_2PI + x * x).sum::<f64>();
        draw[MI] = log_q_cond - log_q;
        draw[TC] = log_q - log_marginals;
        draw[DW] = log_marginals - log_prior;
        draw[KL_MC] = log_q_cond - log_prior;
        draw[RESID] = draw[KL_MC] - kl_closed;
    }

    let s = samples as f64;
    let mut mean = [0.0; TERMS];
    let mut var = [0.0; TERMS];
    for t in 0..TERMS {
        mean[t] = draws.iter().map(|x| x[t]).sum::<f64>() / s;
        if samples > 1 {
            var[t] = draws.iter().map(|x| (x[t] - mean[t]).powi(2)).sum::<f64>() / (s - 1.0);
        }
    }
    PointStats { mean, var }
}

/// Estimates KL to prior, mutual information, total correlation and
/// dimension-wise KL against a standard normal prior with α = γ = 1.
///
/// Draws `samples_per_point` latents from every stored posterior, each
/// record on its own ChaCha substream, so results depend only on `seed`.
/// Standard errors are stratified by record when `samples_per_point ≥ 2`
/// and pooled over all draws otherwise.
pub fn audit(ds: &Dataset, samples_per_point: usize, beta: f64, seed: u64) -> Result<ElboAudit> {
    if ds.is_empty() {
        return Err(Error::invalid("audit needs at least one record"));
    }
    if samples_per_point == 0 {
        return Err(Error::invalid("samples_per_point must be >= 1"));
    }
    if !beta.is_finite() {
        return Err(Error::invalid("beta must be finite"));
    }
    let posts = ds.posteriors();
    let n = posts.len();
    let prior = DiagGaussian::standard(ds.dim())?;
    let closed: Vec<f64> = posts
        .iter()
        .map(|p| kl(p, &prior))
        .collect::<Result<_>>()?;
    let comps: Vec<Component> = posts
        .iter()
        .map(|p| Component {
            mean: p.mean().to_vec(),
            inv_var: p.var().iter().map(|v| 1.0 / v).collect(),
            log_norm: p.var().iter().map(|v| -0.5 * (LN_2PI + v.ln())).collect(),
        })
        .collect();

    let stats: Vec<PointStats> = (0..n)
        .into_par_iter()
        .map(|i| point_terms(i, &comps, &posts[i], closed[i], samples_per_point, seed))
        .collect();

    let nf = n as f64;
    let s = samples_per_point as f64;
    let estimate = |t: usize| {
        let value = stats.iter().map(|p| p.mean[t]).sum::<f64>() / nf;
        let se = if samples_per_point > 1 {
            (stats.iter().map(|p| p.var[t]).sum::<f64>() / (s * nf * nf)).sqrt()
        } else if n > 1 {
            let var = stats.iter().map(|p| (p.mean[t] - value).powi(2)).sum::<f64>() / (nf - 1.0);
            (var / nf).sqrt()
        } else {
            0.0
        };
        Estimate { value, se }
    };
    let mutual_info = estimate(MI);
    let total_correlation = estimate(TC);
    let dimwise_kl = estimate(DW);
    Ok(ElboAudit {
        n_records: n,
        dim: ds.dim(),
        samples_per_point,
        n_samples: n * samples_per_point,
        seed,
        alpha: 1.0,
        beta,
        gamma: 1.0,
        kl_to_prior: estimate(KL_MC),
        kl_closed_form: closed.iter().sum::<f64>() / nf,
        mutual_info,
        total_correlation,
        dimwise_kl,
        residual: estimate(RESID),
        combined_se: (mutual_info.se.powi(2) + total_correlation.se.powi(2) + dimwise_kl.se.powi(2))
            .sqrt(),
    })
}

/// Which variational objective to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Vae,
    BetaVae,
    BetaTcvae,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vae" => Ok(Self::Vae),
            "beta-vae" => Ok(Self::BetaVae),
            "beta-tcvae" => Ok(Self::BetaTcvae),
            other => Err(Error::invalid(format!(
                "unknown objective `{other}` (expected vae, beta-vae or beta-tcvae)"
            ))),
        }
    }
}

/// Scalar objective from an externally supplied reconstruction term.
///
/// VAE: recon − KL. β-VAE: recon − β·KL, with the closed-form KL.
/// β-TCVAE: recon − α·MI − β·TC − γ·dimwise KL from the audit's estimates.
pub fn objective_value(audit: &ElboAudit, recon_loglik: f64, objective: Objective, beta: f64) -> f64 {
    match objective {
        Objective::Vae => recon_loglik - audit.kl_closed_form,
        Objective::BetaVae => recon_loglik - beta * audit.kl_closed_form,
        Objective::BetaTcvae => {
            recon_loglik
                - audit.alpha * audit.mutual_info.value
                - beta * audit.total_correlation.value
                - audit.gamma * audit.dimwise_kl.value
        }
    }
}

impl Report for ElboAudit {
    fn render_text(&self) -> String {
        let mut s = format!(
            "latent ELBO audit: {} records, dim {}, {} samples/record, seed {}\n",
            self.n_records, self.dim, self.samples_per_point, self.seed
        );
        s.push_str(&format!("alpha {} beta {} gamma {}\n", self.alpha, self.beta, self.gamma));
        s.push_str(&format!("{:<22} {:>14} {:>12}\n", "term", "estimate", "se"));
        let rows = [
            ("kl_to_prior (mc)", self.kl_to_prior),
            ("mutual_info", self.mutual_info),
            ("total_correlation", self.total_correlation),
            ("dimwise_kl", self.dimwise_kl),
        ];
        for (name, e) in rows {
            s.push_str(&format!("{:<22} {:>14.6} {:>12.6}\n", name, e.value, e.se));
        }
        s.push_str(&format!("{:<22} {:>14.6} {:>12}\n", "kl_to_prior (closed)", self.kl_closed_form, "-"));
        s.push_str(&format!(
            "{:<22} {:>14.6} {:>12.6}\n",
            "identity residual", self.residual.value, self.residual.se
        ));
        s.push_str(&format!("{:<22} {:>14} {:>12.6}\n", "combined term se", "-", self.combined_se));
        s
    }
}

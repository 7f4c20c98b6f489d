//! One-class abnormality scoring.
//!
//! The normal class is summarized by a single Gaussian whose mean is the
//! average posterior mean and whose covariance combines the posterior
//! variances with the spread of the means. A query is scored by its negative
//! log-likelihood under that Gaussian; larger scores are more abnormal.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{DiagGaussian, FullGaussian};
use crate::io::{Dataset, ScoreRow};

/// How the normal-class covariance is estimated from posteriors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceEstimator {
    /// `1/(N−1) · Σ (Vᵢ + μᵢμᵢᵀ) − μ̂μ̂ᵀ`. Equals `TotalVariance` plus
    /// `μ̂μ̂ᵀ/(N−1)`, so it is not centered unless μ̂ = 0.
    #[default]
    Printed,
    /// Law of total variance: `1/(N−1) · Σ (Vᵢ + (μᵢ−μ̂)(μᵢ−μ̂)ᵀ)`.
    TotalVariance,
}

#[derive(Debug, Clone)]
pub struct NormalModel {
    gaussian: FullGaussian,
    n_fit: usize,
    estimator: CovarianceEstimator,
}

impl NormalModel {
    pub fn from_parts(gaussian: FullGaussian, n_fit: usize, estimator: CovarianceEstimator) -> Result<Self> {
        if n_fit < 2 {
            return Err(Error::invalid(format!("normal model needs n_fit >= 2, got {n_fit}")));
        }
        Ok(Self {
            gaussian,
            n_fit,
            estimator,
        })
    }

    pub fn gaussian(&self) -> &FullGaussian {
        &self.gaussian
    }

    pub fn dim(&self) -> usize {
        self.gaussian.dim()
    }

    pub fn mean(&self) -> &[f64] {
        self.gaussian.mean()
    }

    pub fn n_fit(&self) -> usize {
        self.n_fit
    }

    pub fn jitter_applied(&self) -> f64 {
        self.gaussian.jitter_applied()
    }

    pub fn estimator(&self) -> CovarianceEstimator {
        self.estimator
    }

    /// Fit on the records of `ds` carrying `normal_label`.
    pub fn fit_label(ds: &Dataset, normal_label: &str, estimator: CovarianceEstimator) -> Result<Self> {
        let normals: Vec<&DiagGaussian> = ds
            .records()
            .iter()
            .filter(|r| r.label == normal_label)
            .map(|r| &r.posterior)
            .collect();
        if normals.is_empty() {
            return Err(Error::invalid(format!("no records with label `{normal_label}`")));
        }
        fit_normal(&normals, estimator)
    }

    pub fn score(&self, z: &[f64]) -> Result<f64> {
        score(self, z)
    }
}

pub fn fit_normal(posteriors: &[&DiagGaussian], estimator: CovarianceEstimator) -> Result<NormalModel> {
    let n = posteriors.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "fitting the normal model needs at least 2 records, got {n}"
        )));
    }
    let d = posteriors[0].dim();
    for p in posteriors {
        check_dim(d, p.dim())?;
    }

    let mut mean = vec![0.0; d];
    for p in posteriors {
        for (m, x) in mean.iter_mut().zip(p.mean()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut acc = DMatrix::<f64>::zeros(d, d);
    for p in posteriors {
        let mu = p.mean();
        let centre: Vec<f64> = match estimator {
            CovarianceEstimator::Printed => mu.to_vec(),
            CovarianceEstimator::TotalVariance => mu.iter().zip(&mean).map(|(a, b)| a - b).collect(),
        };
        for i in 0..d {
            acc[(i, i)] += p.var()[i];
            for j in 0..=i {
                acc[(i, j)] += centre[i] * centre[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut v = acc[(i, j)] / denom;
            if estimator == CovarianceEstimator::Printed {
                v -= mean[i] * mean[j];
            }
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let gaussian = FullGaussian::new(mean, cov)?;
    NormalModel::from_parts(gaussian, n, estimator)
}

/// s(z) = −ln N(z; μ̂, V̂)
pub fn score(model: &NormalModel, z: &[f64]) -> Result<f64> {
    Ok(-model.gaussian.log_density(z)?)
}

/// Scores every record by its posterior mean, preserving dataset order.
pub fn score_dataset(model: &NormalModel, ds: &Dataset) -> Result<Vec<ScoreRow>> {
    check_dim(model.dim(), ds.dim())?;
    ds.records()
        .par_iter()
        .map(|r| {
            Ok(ScoreRow {
                id: r.id.clone(),
                label: r.label.clone(),
                score: score(model, r.posterior.mean()).map_err(|e| e.for_record(&r.id))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::gaussian::LN_2PI;

    fn g(mu: &[f64], var: &[f64]) -> DiagGaussian {
        DiagGaussian::new(mu.to_vec(), var.to_vec()).unwrap()
    }

    /// Direct summation of the printed estimator.
    fn printed_oracle(ps: &[DiagGaussian]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = ps.len() as f64;
        let d = ps[0].dim();
        let mu: Vec<f64> = (0..d).map(|i| ps.iter().map(|p| p.mean()[i]).sum::<f64>() / n).collect();
        let mut v = vec![vec![0.0; d]; d];
        for (i, row) in v.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let s: f64 = ps
                    .iter()
                    .map(|p| {
                        let diag = if i == j { p.var()[i] } else { 0.0 };
                        diag + p.mean()[i] * p.mean()[j]
                    })
                    .sum();
                *cell = s / (n - 1.0) - mu[i] * mu[j];
            }
        }
        (mu, v)
    }

    #[test]
    fn two_record_hand_example() {
        let ps = [g(&[0.0], &[1.0]), g(&[2.0], &[1.0])];
        let m = fit_normal(&ps.iter().collect::<Vec<_>>(), CovarianceEstimator::Printed).unwrap();
        assert_eq!(m.mean(), &[1.0]);
        assert_abs_diff_eq!(m.gaussian().cov()[(0, 0)], 5.0, epsilon = 1e-14);
        let (mu, v) = printed_oracle(&ps);
        assert_eq!(mu, vec![1.0]);
        assert_abs_diff_eq!(v[0][0], 5.0, epsilon = 1e-14);
        assert_eq!(m.n_fit(), 2);
        assert_eq!(m.jitter_applied(), 0.0);
    }

    #[test]
    fn identical_posteriors_simplify() {
        for n in [2usize, 10, 100] {
            let ps: Vec<DiagGaussian> = (0..n).map(|_| g(&[0.0], &[1.0])).collect();
            let m = fit_normal(&ps.iter().collect::<Vec<_>>(), CovarianceEstimator::Printed).unwrap();
            assert_eq!(m.mean(), &[0.0]);
            let expected = n as f64 / (n as f64 - 1.0);
            assert_abs_diff_eq!(m.gaussian().cov()[(0, 0)], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_posteriors_engage_jitter() {
        let ps = [g(&[1.0, 1.0], &[1e-12, 1e-12]), g(&[1.0, 1.0], &[1e-12, 1e-12])];
        let m = fit_normal(&ps.iter().collect::<Vec<_>>(), CovarianceEstimator::Printed).unwrap();
        assert!(m.jitter_applied() > 0.0);
        assert!(m.score(&[1.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn printed_matches_oracle_in_3d() {
        let ps = [
            g(&[0.1, 0.2, -0.3], &[0.5, 0.2, 0.3]),
            g(&[1.0, -0.5, 0.7], &[0.1, 0.4, 0.2]),
            g(&[-0.4, 0.9, 0.0], &[0.3, 0.3, 0.6]),
            g(&[0.6, 0.1, 1.1], &[0.2, 0.1, 0.1]),
        ];
        let m = fit_normal(&ps.iter().collect::<Vec<_>>(), CovarianceEstimator::Printed).unwrap();
        let (mu, v) = printed_oracle(&ps);
        for i in 0..3 {
            assert_abs_diff_eq!(m.mean()[i], mu[i], epsilon = 1e-14);
            for (j, &vij) in v[i].iter().enumerate() {
                assert_abs_diff_eq!(m.gaussian().cov()[(i, j)], vij, epsilon = 1e-14);
            }
        }
        // textbook = printed − μ̂μ̂ᵀ/(N−1)
        let t = fit_normal(&ps.iter().collect::<Vec<_>>(), CovarianceEstimator::TotalVariance).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let diff = m.gaussian().cov()[(i, j)] - t.gaussian().cov()[(i, j)];
                assert_abs_diff_eq!(diff, mu[i] * mu[j] / 3.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn score_examples() {
        let std1 = FullGaussian::from_row_major(vec![0.0], &[1.0]).unwrap();
        let m = NormalModel::from_parts(std1, 10, CovarianceEstimator::Printed).unwrap();
        assert_abs_diff_eq!(m.score(&[2.0]).unwrap(), 0.5 * LN_2PI + 2.0, epsilon = 1e-14);

        let cov = FullGaussian::from_row_major(vec![1.0, 2.0], &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let logdet = cov.log_det();
        let m = NormalModel::from_parts(cov, 5, CovarianceEstimator::Printed).unwrap();
        assert_abs_diff_eq!(
            m.score(&[1.0, 2.0]).unwrap(),
            0.5 * (2.0 * LN_2PI + logdet),
            epsilon = 1e-14
        );
        assert!(m.score(&[1.0]).is_err());
    }

    #[test]
    fn fit_rejects_bad_input() {
        let one = [g(&[0.0], &[1.0])];
        assert!(fit_normal(&one.iter().collect::<Vec<_>>(), CovarianceEstimator::Printed).is_err());
        let mixed = [g(&[0.0], &[1.0]), g(&[0.0, 1.0], &[1.0, 1.0])];
        assert!(matches!(
            fit_normal(&mixed.iter().collect::<Vec<_>>(), CovarianceEstimator::Printed),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

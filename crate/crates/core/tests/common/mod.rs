#![allow(dead_code)]

use std::collections::BTreeMap;

use latent_occ::gaussian::DiagGaussian;
use latent_occ::io::{Dataset, EmbeddingRecord};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn diag<R: Rng>(d: usize, rng: &mut R) -> DiagGaussian {
    latent_occ::crsd::random_diag(d, rng)
}

pub fn dataset(posts: Vec<DiagGaussian>, label: impl Fn(usize) -> String) -> Dataset {
    Dataset::new(
        posts
            .into_iter()
            .enumerate()
            .map(|(i, p)| EmbeddingRecord {
                id: format!("r{i:04}"),
                label: label(i),
                posterior: p,
            })
            .collect(),
    )
    .unwrap()
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn rotation<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    a.qr().q()
}

pub fn diag_strategy(d: usize) -> impl Strategy<Value = DiagGaussian> {
    (
        prop::collection::vec(-3.0..3.0f64, d),
        prop::collection::vec(0.05..5.0f64, d),
    )
        .prop_map(|(m, v)| DiagGaussian::new(m, v).unwrap())
}

pub fn pair_strategy() -> impl Strategy<Value = (DiagGaussian, DiagGaussian)> {
    (1usize..6).prop_flat_map(|d| (diag_strategy(d), diag_strategy(d)))
}

/// Wins plus half ties over all abnormal × normal pairs.
pub fn brute_force_auc(scored: &[(f64, bool)]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for &(a, pos_a) in scored {
        if !pos_a {
            continue;
        }
        for &(b, pos_b) in scored {
            if pos_b {
                continue;
            }
            pairs += 1.0;
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Homogeneity and completeness from mutual information: h = I/H(C), c = I/H(K).
pub fn mi_oracle(truth: &[usize], pred: &[usize]) -> (f64, f64) {
    let n = truth.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut nc: BTreeMap<usize, usize> = BTreeMap::new();
    let mut nk: BTreeMap<usize, usize> = BTreeMap::new();
    for (&c, &k) in truth.iter().zip(pred) {
        *joint.entry((c, k)).or_default() += 1;
        *nc.entry(c).or_default() += 1;
        *nk.entry(k).or_default() += 1;
    }
    let prob = |m: BTreeMap<usize, usize>| -> BTreeMap<usize, f64> {
        m.into_iter().map(|(key, v)| (key, v as f64 / n)).collect()
    };
    let (pc, pk) = (prob(nc), prob(nk));
    let joint: BTreeMap<(usize, usize), f64> = joint.into_iter().map(|(key, v)| (key, v as f64 / n)).collect();
    let h = |m: &BTreeMap<usize, f64>| -m.values().map(|p| p * p.ln()).sum::<f64>();
    let mi: f64 = joint.iter().map(|(&(c, k), &p)| p * (p / (pc[&c] * pk[&k])).ln()).sum();
    let (hc, hk) = (h(&pc), h(&pk));
    (
        if hc == 0.0 { 1.0 } else { mi / hc },
        if hk == 0.0 { 1.0 } else { mi / hk },
    )
}

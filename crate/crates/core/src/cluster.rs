//! Hierarchical agglomerative clustering on a stored dissimilarity matrix,
//! plus K-means and DBSCAN baselines on posterior means.
//!
//! Agglomeration uses the nearest-neighbor chain algorithm with
//! Lance–Williams updates, which is exact for the reducible linkages offered
//! here (single, complete, average) and runs in O(n²) time. The stored
//! matrix needs O(n²) memory, which bounds practical inputs to about 20,000
//! points.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value for DBSCAN noise points.
pub const NOISE: i64 = -1;

const SYMMETRY_RTOL: f64 = 1e-12;

/// Dense symmetric n × n dissimilarity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissimilarity {
    n: usize,
    data: Vec<f64>,
}

impl Dissimilarity {
    /// Validates symmetry, finiteness and the zero diagonal.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!("expected {} entries, got {}", n * n, data.len())));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite dissimilarity at ({}, {})",
                pos / n,
                pos % n
            )));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("non-zero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > SYMMETRY_RTOL * scale {
                    return Err(Error::invalid(format!("asymmetric at ({i}, {j}): {a} vs {b}")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub(crate) fn from_square_unchecked(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, cell) in row.iter_mut().enumerate() {
                if i != j {
                    *cell = f(i.min(j), i.max(j));
                }
            }
        });
        Self::new(n, data)
    }

    /// Euclidean (or squared Euclidean) distances between points.
    pub fn euclidean(points: &[Vec<f64>], squared: bool) -> Result<Self> {
        Self::from_fn(points.len(), |i, j| {
            let s = sq_dist(&points[i], &points[j]);
            if squared {
                s
            } else {
                s.sqrt()
            }
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Average,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(Error::invalid(format!("unknown linkage `{other}`"))),
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        })
    }
}

/// One merge. Leaves are `0..n`; the cluster created by merge `i` is `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

/// Flat cluster labels aligned with input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i64>,
}

impl ClusterAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of non-noise clusters.
    pub fn n_clusters(&self) -> usize {
        let mut v: Vec<i64> = self.labels.iter().copied().filter(|&l| l != NOISE).collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Partition as sorted member lists, independent of label names.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut groups: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
        let mut singles = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if l == NOISE {
                singles.push(vec![i]);
            } else {
                groups.entry(l).or_default().push(i);
            }
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().chain(singles).collect();
        out.sort();
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins and returns the new root (the smaller of the two roots).
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        lo
    }
}

fn lance_williams(linkage: Linkage, dak: f64, dbk: f64, na: usize, nb: usize) -> f64 {
    match linkage {
        Linkage::Single => dak.min(dbk),
        Linkage::Complete => dak.max(dbk),
        Linkage::Average => (na as f64 * dak + nb as f64 * dbk) / (na + nb) as f64,
    }
}

/// Agglomerative clustering of a dissimilarity matrix.
///
/// Nearest neighbors are searched in increasing index order; ties keep the
/// previous chain element when it is among the nearest, otherwise the lowest
/// index wins. Merges are reported in non-decreasing height order (stable
/// with respect to discovery order).
pub fn agglomerative(dis: &Dissimilarity, linkage: Linkage) -> Result<Dendrogram> {
    let n = dis.len();
    if n < 2 {
        return Err(Error::invalid(format!("agglomerative clustering needs n >= 2, got {n}")));
    }
    let mut d = dis.data.clone();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut n_active = n;
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    // (obs in a, obs in b, height) in discovery order
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);

    while n_active > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster"));
        }
        loop {
            let a = *chain.last().expect("non-empty chain");
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            let (mut best, mut best_d) = match prev {
                Some(p) => (p, d[a * n + p]),
                None => (usize::MAX, f64::INFINITY),
            };
            let row = &d[a * n..(a + 1) * n];
            for (x, &dx) in row.iter().enumerate() {
                if x != a && active[x] && dx < best_d {
                    best = x;
                    best_d = dx;
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                let (lo, hi) = (a.min(best), a.max(best));
                raw.push((lo, hi, best_d));
                let (na, nb) = (size[lo], size[hi]);
                for k in 0..n {
                    if active[k] && k != lo && k != hi {
                        let v = lance_williams(linkage, d[lo * n + k], d[hi * n + k], na, nb);
                        d[lo * n + k] = v;
                        d[k * n + lo] = v;
                    }
                }
                active[hi] = false;
                size[lo] = na + nb;
                n_active -= 1;
                break;
            }
            chain.push(best);
        }
    }

    raw.sort_by(|x, y| x.2.total_cmp(&y.2));
    Ok(relabel(n, &raw))
}

/// Converts merges between representative observations into the
/// `0..n` leaves / `n + i` internal-node numbering.
fn relabel(n: usize, raw: &[(usize, usize, f64)]) -> Dendrogram {
    let mut uf = UnionFind::new(n);
    let mut node_of_root: Vec<usize> = (0..n).collect();
    let mut size_of_root = vec![1usize; n];
    let mut merges = Vec::with_capacity(raw.len());
    for (i, &(x, y, h)) in raw.iter().enumerate() {
        let (rx, ry) = (uf.find(x), uf.find(y));
        let (na, nb) = (node_of_root[rx], node_of_root[ry]);
        let size = size_of_root[rx] + size_of_root[ry];
        let root = uf.union(rx, ry);
        node_of_root[root] = n + i;
        size_of_root[root] = size;
        merges.push(Merge {
            a: na.min(nb),
            b: na.max(nb),
            height: h,
            size,
        });
    }
    Dendrogram { leaves: n, merges }
}

/// Flat clustering into exactly `k` clusters by undoing the last `k − 1`
/// merges. Cluster indices follow the first appearance of a member in input
/// order.
pub fn cut(dend: &Dendrogram, k: usize) -> Result<ClusterAssignment> {
    let n = dend.leaves;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} is outside [1, {n}]")));
    }
    if dend.merges.len() + 1 != n {
        return Err(Error::invalid("dendrogram is incomplete"));
    }
    // representative leaf of each node
    let mut rep: Vec<usize> = (0..n).collect();
    let mut uf = UnionFind::new(n);
    for m in &dend.merges[..n - k] {
        let (ra, rb) = (rep[m.a], rep[m.b]);
        let root = uf.union(ra, rb);
        rep.push(root);
    }
    let mut label_of_root = vec![-1i64; n];
    let mut next = 0i64;
    let labels = (0..n)
        .map(|i| {
            let r = uf.find(i);
            if label_of_root[r] < 0 {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect();
    Ok(ClusterAssignment { labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    /// Relative decrease of the within-cluster sum of squares below which
    /// Lloyd iterations stop.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    pub centers: Vec<Vec<f64>>,
    pub wcss: f64,
    pub iterations: usize,
}

/// K-means with k-means++ seeding; the best of `n_init` restarts by
/// within-cluster sum of squares is returned.
pub fn kmeans(points: &[Vec<f64>], cfg: &KMeansConfig) -> Result<KMeansResult> {
    let n = points.len();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::invalid(format!("k = {} is outside [1, {n}]", cfg.k)));
    }
    if cfg.n_init == 0 {
        return Err(Error::invalid("n_init must be >= 1"));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("points have inconsistent dimensions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.n_init {
        let centers = kmeans_pp(points, cfg.k, &mut rng);
        let run = lloyd(points, centers, cfg);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_pp<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding leaving us on a zero-weight point
            if dist[pick] <= 0.0 {
                pick = dist.iter().rposition(|&w| w > 0.0).expect("positive weight");
            }
            pick
        } else {
            // all remaining points coincide with a centre
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (di, p) in dist.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centers.iter().enumerate() {
        let s = sq_dist(p, centre);
        if s < best.1 {
            best = (c, s);
        }
    }
    best
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, cfg: &KMeansConfig) -> KMeansResult {
    let (n, k, d) = (points.len(), centers.len(), points[0].len());
    let mut labels = vec![0usize; n];
    let mut prev_wcss = f64::INFINITY;
    let mut wcss = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..cfg.max_iter {
        iterations = it + 1;
        let assigned: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(p, &centers)).collect();
        let mut counts = vec![0usize; k];
        for (l, &(c, _)) in labels.iter_mut().zip(&assigned) {
            *l = c;
            counts[c] += 1;
        }
        // Empty clusters take the point farthest from its current centre.
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a donor cluster");
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                dist[far] = 0.0;
            }
        }
        let mut sums = vec![vec![0.0; d]; k];
        for (p, &l) in points.iter().zip(&labels) {
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, s) in sums.into_iter().enumerate() {
            centers[c] = s.into_iter().map(|v| v / counts[c] as f64).collect();
        }
        wcss = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| sq_dist(p, &centers[l]))
            .sum();
        if prev_wcss.is_finite() && (prev_wcss - wcss) <= cfg.tol * prev_wcss {
            break;
        }
        prev_wcss = wcss;
    }
    KMeansResult {
        assignment: ClusterAssignment {
            labels: labels.into_iter().map(|l| l as i64).collect(),
        },
        centers,
        wcss,
        iterations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanConfig {
    pub eps: f64,
    /// Neighborhood size, counting the point itself, for a core point.
    pub min_pts: usize,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        Self { eps: 0.5, min_pts: 5 }
    }
}

/// DBSCAN with Euclidean distance; neighbors are points within `eps`
/// inclusive. Clusters are numbered in order of discovery and border points
/// join the first cluster that reaches them.
pub fn dbscan(points: &[Vec<f64>], cfg: &DbscanConfig) -> Result<ClusterAssignment> {
    if !(cfg.eps > 0.0 && cfg.eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive, got {}", cfg.eps)));
    }
    if cfg.min_pts == 0 {
        return Err(Error::invalid("min_pts must be >= 1"));
    }
    let n = points.len();
    let eps2 = cfg.eps * cfg.eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| sq_dist(&points[i], &points[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= cfg.min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0i64;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if labels[start] != NOISE || !core[start] {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(ClusterAssignment { labels })
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use latent_occ::cluster::{agglomerative, cut, kmeans, ClusterAssignment, Dissimilarity, KMeansConfig, Linkage};
use latent_occ::crsd::{crsd_set, pairwise_self_referenced, verify_identities, IdentityConfig, ProfileMatrix};
use latent_occ::elbo::audit;
use latent_occ::eval::{crossval_occ, roc_auc, v_measure, CrossvalConfig, NoiseMode};
use latent_occ::fixture::{generate, Preset};
use latent_occ::gaussian::DiagGaussian;
use rand::Rng;

use common::{brute_force_auc, dataset, diag, mi_oracle, rng};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(t: Duration, limit_s: f64) -> bool {
    t.as_secs_f64() < limit_s
}

fn a1() -> Outcome {
    let start = Instant::now();
    let r = verify_identities(&IdentityConfig {
        trials: 1000,
        dims: vec![1, 8],
        jsd_trials: 0,
        jsd_samples: 2,
        seed: 1,
    })
    .unwrap();
    let t = start.elapsed();
    let worst = r.identities.iter().map(|c| c.max_violation).fold(0.0, f64::max);
    let names: Vec<String> = r.identities.iter().map(|c| format!("{}={:.1e}", c.name, c.max_violation)).collect();
    outcome(
        worst <= 1e-9 && within(t, 5.0),
        format!("{} ({:.2}s, limit 1e-9 / 5s)", names.join(" "), t.as_secs_f64()),
    )
}

fn a2() -> Outcome {
    let start = Instant::now();
    let r = verify_identities(&IdentityConfig {
        trials: 1,
        dims: vec![1, 8],
        jsd_trials: 100,
        jsd_samples: 10_000,
        seed: 2,
    })
    .unwrap();
    let t = start.elapsed();
    let j = &r.jsd_bound;
    outcome(
        j.holds == j.trials && within(t, 30.0),
        format!(
            "bound held {}/{} min_margin={:.4} ({:.2}s, limit 30s)",
            j.holds,
            j.trials,
            j.min_margin,
            t.as_secs_f64()
        ),
    )
}

fn a3() -> Outcome {
    let mut r = rng(3);
    let (mut asym, mut tri) = (0usize, 0.0f64);
    for d in [1, 8] {
        let refs: Vec<DiagGaussian> = (0..5).map(|_| diag(d, &mut r)).collect();
        for _ in 0..1000 {
            let (p, q, s) = (diag(d, &mut r), diag(d, &mut r), diag(d, &mut r));
            let pq = crsd_set(&p, &q, &refs).unwrap();
            if pq != crsd_set(&q, &p, &refs).unwrap() {
                asym += 1;
            }
            let via = crsd_set(&p, &s, &refs).unwrap() + crsd_set(&s, &q, &refs).unwrap();
            tri = tri.max(pq - via);
        }
    }
    outcome(
        asym == 0 && tri <= 1e-9,
        format!("asymmetric={asym} worst triangle excess={tri:.2e} (limit 1e-9)"),
    )
}

fn a4() -> Outcome {
    let mut r = rng(4);
    let posts: Vec<DiagGaussian> = (0..200).map(|_| diag(4, &mut r)).collect();
    let m = ProfileMatrix::build(&posts, &posts).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (j, k) = (r.random_range(0..200), r.random_range(0..200));
        let naive = crsd_set(&posts[j], &posts[k], &posts).unwrap();
        worst = worst.max((m.distance(j, k) - naive).abs());
    }
    outcome(worst <= 1e-12, format!("max |profile - naive| = {worst:.2e} (limit 1e-12)"))
}

fn a5() -> Outcome {
    let mut r = rng(5);
    let posts: Vec<DiagGaussian> = (0..50)
        .map(|_| DiagGaussian::new(diag(4, &mut r).mean().to_vec(), vec![1.0; 4]).unwrap())
        .collect();
    let means: Vec<Vec<f64>> = posts.iter().map(|p| p.mean().to_vec()).collect();
    let pair = pairwise_self_referenced(&posts).unwrap();
    let eucl = Dissimilarity::euclidean(&means, true).unwrap();
    let mut mismatched = Vec::new();
    let mut worst: f64 = 0.0;
    for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
        let a = agglomerative(&pair, linkage).unwrap();
        let b = agglomerative(&eucl, linkage).unwrap();
        let same = a
            .merges
            .iter()
            .zip(&b.merges)
            .all(|(x, y)| (x.a, x.b, x.size) == (y.a, y.b, y.size));
        if !same {
            mismatched.push(linkage.to_string());
        }
        for (x, y) in a.merges.iter().zip(&b.merges) {
            worst = worst.max((x.height - y.height).abs());
        }
    }
    outcome(
        mismatched.is_empty() && worst <= 1e-9,
        format!("mismatched linkages {mismatched:?}, max height diff {worst:.2e} (limit 1e-9)"),
    )
}

fn mean_auc(shift: f64) -> f64 {
    let ds = generate(&Preset::two_class(600, 8, shift), 6).unwrap();
    let r = crossval_occ(&ds, &CrossvalConfig { seed: 6, ..Default::default() }).unwrap();
    r.overall.auc.expect("auc present").mean
}

fn a6() -> Outcome {
    let start = Instant::now();
    let shifted = mean_auc(3.0);
    let null = mean_auc(0.0);
    let t = start.elapsed();
    outcome(
        shifted >= 0.95 && (0.45..=0.55).contains(&null) && within(t, 10.0),
        format!(
            "shift=3 AUC={shifted:.4} (need >= 0.95), shift=0 AUC={null:.4} (need [0.45, 0.55]) ({:.2}s, limit 10s)",
            t.as_secs_f64()
        ),
    )
}

fn a7() -> Outcome {
    let mut r = rng(7);
    let mut auc_err: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(2..=200);
        let mut scored: Vec<(f64, bool)> = (0..n)
            .map(|_| (r.random_range(0..15) as f64 * 0.5, r.random_bool(0.4)))
            .collect();
        scored[0].1 = true;
        scored[1].1 = false;
        auc_err = auc_err.max((roc_auc(&scored).unwrap().auc - brute_force_auc(&scored)).abs());
    }
    let mut v_err: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(2..30);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..5)).collect();
        let names: Vec<String> = truth.iter().map(|t| format!("c{t}")).collect();
        let got = v_measure(
            &names,
            &ClusterAssignment { labels: pred.iter().map(|&p| p as i64).collect() },
            NoiseMode::Singletons,
        )
        .unwrap();
        let (h, c) = mi_oracle(&truth, &pred);
        v_err = v_err.max((got.homogeneity - h).abs()).max((got.completeness - c).abs());
    }
    let ex = v_measure(
        &["A", "A", "B", "B"],
        &ClusterAssignment { labels: vec![0, 0, 1, 2] },
        NoiseMode::Singletons,
    )
    .unwrap();
    let example_ok = (ex.homogeneity - 1.0).abs() <= 1e-12
        && (ex.completeness - 0.5).abs() <= 1e-12
        && (ex.v_measure - 2.0 / 3.0).abs() <= 1e-12;
    outcome(
        auc_err <= 1e-12 && v_err <= 1e-12 && example_ok,
        format!(
            "auc err {auc_err:.1e}, v-measure err {v_err:.1e}, worked example h={:.6} c={:.6} V={:.6} (expected 1, 0.5, 0.666667)",
            ex.homogeneity, ex.completeness, ex.v_measure
        ),
    )
}

fn a8() -> Outcome {
    let start = Instant::now();
    let mut r = rng(8);
    let ds = dataset((0..500).map(|_| diag(4, &mut r)).collect(), |_| "x".into());
    let a = audit(&ds, 50, 1.0, 8).unwrap();
    let t = start.elapsed();
    let gap = a.mutual_info.value + a.total_correlation.value + a.dimwise_kl.value - a.kl_closed_form;
    outcome(
        gap.abs() <= 3.0 * a.combined_se && within(t, 60.0),
        format!(
            "MI+TC+DW - KL = {gap:.5}, combined SE {:.5} ({:.2}s, limit 60s)",
            a.combined_se,
            t.as_secs_f64()
        ),
    )
}

fn a9() -> Outcome {
    let (k, n, dim, sep) = (4, 200, 8, 0.5);
    let mut wins = 0;
    let mut cells = Vec::new();
    for seed in 0..5 {
        let ds = generate(&Preset::k_blobs(k, n, dim, sep), seed).unwrap();
        let truth = ds.labels();
        let posts = ds.posteriors();
        let dis = ProfileMatrix::build(&posts, &posts).unwrap().pairwise();
        let sm = cut(&agglomerative(&dis, Linkage::Average).unwrap(), k).unwrap();
        let km = kmeans(&ds.means(), &KMeansConfig::new(k, seed)).unwrap().assignment;
        let v_sm = v_measure(&truth, &sm, NoiseMode::Singletons).unwrap().v_measure;
        let v_km = v_measure(&truth, &km, NoiseMode::Singletons).unwrap().v_measure;
        if v_sm >= v_km {
            wins += 1;
        }
        cells.push(format!("{v_sm:.3}/{v_km:.3}"));
    }
    outcome(
        wins >= 4,
        format!("agg-sm >= kmeans in {wins}/5 seeds (need 4), V sm/km: {}", cells.join(" ")),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_latent-occ"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

/// Every CLI stage, run inside `dir` with relative paths.
fn run_pipelines(dir: &Path) -> Result<(), String> {
    let steps: &[&[&str]] = &[
        &["fixture", "--preset", "two-class", "--n", "120", "--dim", "4", "--seed", "3", "--out", "fx.jsonl"],
        &["fixture", "--preset", "k-blobs", "--n", "60", "--dim", "3", "--k", "3", "--seed", "3", "--out", "blobs.csv"],
        &["fixture", "--preset", "degenerate", "--dim", "3", "--seed", "3", "--out", "degen.jsonl"],
        &["fixture", "--preset", "two-class", "--n", "80", "--dim", "3", "--seed", "5", "--out", "grid/emb_b1_d8_none.jsonl"],
        &["fixture", "--preset", "two-class", "--n", "80", "--dim", "3", "--seed", "6", "--out", "grid/emb_b4_d8_fab.jsonl"],
        &["fit-normal", "--input", "fx.jsonl", "--out", "model.json"],
        &["score", "--model", "model.json", "--input", "fx.jsonl", "--out", "scores.jsonl"],
        &["eval-occ", "--scores", "scores.jsonl", "--per-class", "--roc-csv", "roc.csv", "--out", "occ.txt", "--json"],
        &["crossval", "--input", "fx.jsonl", "--folds", "4", "--seed", "9", "--out", "cv.txt", "--json"],
        &["crsd-matrix", "--input", "blobs.csv", "--out", "m.bin"],
        &["cluster", "--input", "blobs.csv", "--algo", "agg-sm", "--k", "3", "--seed", "1", "--out", "sm.jsonl"],
        &["cluster", "--input", "blobs.csv", "--algo", "agg-em", "--k", "3", "--seed", "1", "--out", "em.jsonl"],
        &["cluster", "--input", "blobs.csv", "--algo", "kmeans", "--k", "3", "--seed", "1", "--out", "km.jsonl"],
        &["cluster", "--input", "blobs.csv", "--algo", "dbscan", "--eps", "1.0", "--seed", "1", "--out", "db.jsonl"],
        &["eval-cluster", "--truth", "blobs.csv", "--pred", "sm.jsonl", "--out", "ec.txt", "--json"],
        &["elbo-audit", "--input", "fx.jsonl", "--samples", "5", "--seed", "4", "--out", "elbo.txt", "--json"],
        &["traverse", "--model", "model.json", "--out", "grid.jsonl"],
        &["verify-identities", "--trials", "20", "--jsd-trials", "4", "--jsd-samples", "200", "--seed", "2", "--out", "id.txt"],
        &["sweep", "--dir", "grid", "--folds", "3", "--seed", "1", "--out", "sweep.txt", "--json"],
        &["fit-normal", "--input", "degen.jsonl", "--estimator", "total-variance", "--out", "degen-model.json"],
    ];
    for s in steps {
        cli(dir, s)?;
    }
    Ok(())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn a10() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = run_pipelines(a.path()).and_then(|_| run_pipelines(b.path())) {
        return outcome(false, format!("pipeline failed: {e}"));
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa.keys().filter(|k| sa.get(*k) != sb.get(*k)).collect();
    outcome(
        sa.len() == sb.len() && differing.is_empty(),
        format!("{} artifacts compared, differing: {differing:?}", sa.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("A1 closed-form identities", a1),
        ("A2 JSD lower bound", a2),
        ("A3 pseudometric", a3),
        ("A4 profile equivalence", a4),
        ("A5 Euclidean-reduction dendrogram", a5),
        ("A6 OCC pipeline AUC", a6),
        ("A7 metric oracles", a7),
        ("A8 ELBO decomposition", a8),
        ("A9 Agg-SM vs K-means ordering", a9),
        ("A10 CLI determinism", a10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

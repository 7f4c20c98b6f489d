mod common;

use std::path::Path;
use std::process::{Command, Output};

use latent_occ::gaussian::DiagGaussian;
use latent_occ::io::{
    model_from_json, model_to_json, parse_csv, parse_jsonl, read_matrix, read_rows, write_csv, write_jsonl,
    write_matrix, write_rows, Dataset, EmbeddingRecord, GridRow, MatrixFile, Provenance, ScoreRow,
};
use latent_occ::occ::{fit_normal, CovarianceEstimator};
use proptest::prelude::*;

use common::{diag, rng};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latent-occ"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..5, 1usize..12, 0u64..10_000).prop_map(|(d, n, seed)| {
        let mut r = rng(seed);
        let recs = (0..n)
            .map(|i| EmbeddingRecord {
                id: format!("id-{i}"),
                label: if i % 3 == 0 { "NILM".into() } else { format!("L{}", i % 3) },
                posterior: diag(d, &mut r),
            })
            .collect();
        Dataset::new(recs).unwrap()
    })
}

/// Means and labels survive exactly; variances pass through a log and back.
fn assert_close(a: &Dataset, b: &Dataset) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.records().iter().zip(b.records()) {
        assert_eq!((&x.id, &x.label), (&y.id, &y.label));
        assert_eq!(x.posterior.mean(), y.posterior.mean());
        for (u, v) in x.posterior.var().iter().zip(y.posterior.var()) {
            assert!((u - v).abs() <= 1e-15 * v, "{u} vs {v}");
        }
    }
}

proptest! {
    #[test]
    fn jsonl_text_is_stable_after_one_round_trip(ds in dataset_strategy(), with_prov in any::<bool>()) {
        let prov = Provenance::for_config(&"cfg");
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &ds, with_prov.then_some(&prov)).unwrap();
        let back = parse_jsonl(buf.as_slice()).unwrap();
        assert_close(&back, &ds);
        let mut again = Vec::new();
        write_jsonl(&mut again, &back, with_prov.then_some(&prov)).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn csv_text_is_stable_after_one_round_trip(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &ds).unwrap();
        let back = parse_csv(buf.as_slice()).unwrap();
        assert_close(&back, &ds);
        let mut again = Vec::new();
        write_csv(&mut again, &back).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn matrix_round_trip(rows in 1usize..6, cols in 1usize..6, seed in 0u64..1000) {
        let mut r = rng(seed);
        let values: Vec<f64> = (0..rows * cols).map(|_| diag(1, &mut r).mean()[0]).collect();
        let m = MatrixFile { rows, cols, dim: 3, values };
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        prop_assert_eq!(buf.len(), 8 * (8 + rows * cols));
        prop_assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
        prop_assert!(read_matrix(&buf[..buf.len() - 8]).is_err());
    }

    #[test]
    fn model_round_trip(seed in 0u64..1000, d in 1usize..5) {
        let mut r = rng(seed);
        let posts: Vec<DiagGaussian> = (0..d + 3).map(|_| diag(d, &mut r)).collect();
        let model = fit_normal(&posts.iter().collect::<Vec<_>>(), CovarianceEstimator::Printed).unwrap();
        let back = model_from_json(&model_to_json(&model, None)).unwrap();
        prop_assert_eq!(back.mean(), model.mean());
        prop_assert_eq!(back.gaussian().cov(), model.gaussian().cov());
        prop_assert_eq!(back.n_fit(), model.n_fit());
    }
}

#[test]
fn rows_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let scores = vec![
        ScoreRow { id: "a".into(), label: "NILM".into(), score: 1.25 },
        ScoreRow { id: "b".into(), label: "ABN".into(), score: -0.1 },
    ];
    let p = dir.path().join("s.jsonl");
    write_rows(&p, &scores, Some(&Provenance::for_config(&1))).unwrap();
    assert_eq!(read_rows::<ScoreRow>(&p).unwrap(), scores);
    let grid = vec![GridRow { dim: 0, step: 3, z: vec![0.1, 1e-300, -7.0] }];
    let g = dir.path().join("g.jsonl");
    write_rows(&g, &grid, None).unwrap();
    assert_eq!(read_rows::<GridRow>(&g).unwrap(), grid);
}

#[test]
fn malformed_input_is_rejected() {
    let ragged = "{\"id\":\"a\",\"label\":\"x\",\"mu\":[0.0],\"logvar\":[0.0]}\n\
                  {\"id\":\"b\",\"label\":\"x\",\"mu\":[0.0,1.0],\"logvar\":[0.0,0.0]}\n";
    assert!(parse_jsonl(ragged.as_bytes()).is_err());
    let dup = "{\"id\":\"a\",\"label\":\"x\",\"mu\":[0.0],\"logvar\":[0.0]}\n\
               {\"id\":\"a\",\"label\":\"y\",\"mu\":[1.0],\"logvar\":[0.0]}\n";
    assert!(parse_jsonl(dup.as_bytes()).is_err());
    assert!(parse_jsonl("".as_bytes()).is_err());
    assert!(parse_csv("id,label,mu_0,logvar_1\nx,y,0,0\n".as_bytes()).is_err());
    assert!(model_from_json("{\"version\":\"other/9\"}").is_err());
}

#[test]
fn fixture_contract() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fixture", "--preset", "two-class", "--seed", "7", "--out", "fx.jsonl"]);
    let text = std::fs::read_to_string(dir.path().join("fx.jsonl")).unwrap();
    assert!(text.starts_with("{\"_provenance\":"));
    let ds = parse_jsonl(text.as_bytes()).unwrap();
    assert_eq!(ds.len(), 600);
    assert_eq!(ds.dim(), 8);
    assert_eq!(ds.with_label("NILM").len(), 300);
    assert_eq!(ds.with_label("ABN").len(), 300);
}

#[test]
fn pipeline_stages_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["fixture", "--preset", "two-class", "--n", "200", "--dim", "4", "--seed", "1", "--out", "fx.csv"]);
    ok(d, &["fit-normal", "--input", "fx.csv", "--out", "model.json"]);
    ok(d, &["score", "--model", "model.json", "--input", "fx.csv", "--out", "scores.jsonl"]);
    let scores: Vec<ScoreRow> = read_rows(&d.join("scores.jsonl")).unwrap();
    assert_eq!(scores.len(), 200);
    ok(d, &[
        "eval-occ", "--scores", "scores.jsonl", "--per-class", "--roc-csv", "roc.csv", "--out", "occ.txt", "--json",
    ]);
    let report = std::fs::read_to_string(d.join("occ.txt")).unwrap();
    assert!(report.starts_with("# latent-occ "));
    assert!(d.join("occ.txt.json").exists());
    assert!(std::fs::read_to_string(d.join("roc.csv")).unwrap().contains("threshold,fpr,tpr"));
    ok(d, &["traverse", "--model", "model.json", "--dims", "0,2", "--out", "grid.jsonl"]);
    let grid: Vec<GridRow> = read_rows(&d.join("grid.jsonl")).unwrap();
    assert_eq!(grid.len(), 20);
    let stdout = ok(d, &["crossval", "--input", "fx.csv", "--folds", "3", "--seed", "2"]);
    assert!(stdout.starts_with("# latent-occ "));
}

#[test]
fn clustering_stages_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["fixture", "--preset", "k-blobs", "--n", "60", "--dim", "3", "--k", "3", "--seed", "4", "--out", "b.jsonl"]);
    ok(d, &["crsd-matrix", "--input", "b.jsonl", "--out", "m.bin"]);
    let m = read_matrix(std::fs::File::open(d.join("m.bin")).unwrap()).unwrap();
    assert_eq!((m.rows, m.cols, m.dim), (60, 60, 3));
    for algo in ["agg-sm", "agg-em", "kmeans", "dbscan"] {
        ok(d, &["cluster", "--input", "b.jsonl", "--algo", algo, "--k", "3", "--seed", "1", "--out", "c.jsonl"]);
        let out = ok(d, &["eval-cluster", "--truth", "b.jsonl", "--pred", "c.jsonl"]);
        assert!(out.contains("V-measure") || out.contains("v_measure"), "{out}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = run(d, &["fit-normal", "--input", "nope.jsonl", "--out", "m.json"]);
    assert_eq!(missing.status.code(), Some(2));
    ok(d, &["fixture", "--preset", "two-class", "--n", "20", "--dim", "2", "--seed", "1", "--out", "fx.jsonl"]);
    let bad_label = run(d, &["fit-normal", "--input", "fx.jsonl", "--label-normal", "NOPE", "--out", "m.json"]);
    assert_eq!(bad_label.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_label.stderr).starts_with("error:"));
    let usage = run(d, &["cluster", "--input", "fx.jsonl"]);
    assert_eq!(usage.status.code(), Some(1));
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));
}

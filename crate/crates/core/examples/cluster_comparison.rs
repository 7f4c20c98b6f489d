//! Compare reference-profile agglomerative clustering (Agg-SM) against
//! Euclidean agglomerative (Agg-EM), K-means and DBSCAN on k-blobs fixtures.
//!
//! Usage: cargo run --release --example cluster_comparison [sep] [spread] [var_low] [var_high] [seeds]

use latent_occ::cluster::{agglomerative, cut, dbscan, kmeans, DbscanConfig, Dissimilarity, KMeansConfig, Linkage};
use latent_occ::crsd::pairwise_self_referenced;
use latent_occ::crsd::ProfileMatrix;
use latent_occ::eval::{v_measure, NoiseMode};
use latent_occ::fixture::{generate, Preset};

fn arg(i: usize, default: f64) -> f64 {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> latent_occ::Result<()> {
    let sep = arg(1, 3.0);
    let spread = arg(2, 1.0);
    let var_low = arg(3, 0.1);
    let var_high = arg(4, 0.5);
    let seeds = arg(5, 5.0) as u64;
    let (k, n, dim) = (4, 200, 8);

    println!("k-blobs: k={k} n={n} dim={dim} sep={sep} spread={spread} var=[{var_low}, {var_high}]");
    println!("{:>4} {:>8} {:>8} {:>8} {:>8} {:>8}", "seed", "agg-sm", "agg-pair", "agg-em", "kmeans", "dbscan");
    for seed in 0..seeds {
        let preset = Preset::KBlobs { k, n, dim, sep, spread, var_low, var_high };
        let ds = generate(&preset, seed)?;
        let truth = ds.labels();
        let posts = ds.posteriors();
        let means = ds.means();
        let v = |labels| v_measure(&truth, &labels, NoiseMode::Singletons).map(|r| r.v_measure);

        let sm = ProfileMatrix::build(&posts, &posts)?.pairwise();
        let agg_sm = v(cut(&agglomerative(&sm, Linkage::Average)?, k)?)?;
        let pair = pairwise_self_referenced(&posts)?;
        let agg_pair = v(cut(&agglomerative(&pair, Linkage::Average)?, k)?)?;
        let em = Dissimilarity::euclidean(&means, false)?;
        let agg_em = v(cut(&agglomerative(&em, Linkage::Average)?, k)?)?;
        let km = v(kmeans(&means, &KMeansConfig::new(k, seed))?.assignment)?;
        let db = v(dbscan(&means, &DbscanConfig::default())?)?;
        println!("{seed:>4} {agg_sm:>8.4} {agg_pair:>8.4} {agg_em:>8.4} {km:>8.4} {db:>8.4}");
    }
    Ok(())
}

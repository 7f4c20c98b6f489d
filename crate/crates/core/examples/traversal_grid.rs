//! Latent traversals around the normal-class mean, one line per step.
//!
//! Usage: cargo run --example traversal_grid

use latent_occ::fixture::{generate, Preset, NORMAL_LABEL};
use latent_occ::occ::{CovarianceEstimator, NormalModel};
use latent_occ::traverse::{pairwise_plane, traversal, Dims};

fn main() -> latent_occ::Result<()> {
    let ds = generate(&Preset::two_class(100, 3, 3.0), 3)?;
    let model = NormalModel::fit_label(&ds, NORMAL_LABEL, CovarianceEstimator::Printed)?;
    for g in traversal(&model, &Dims::List(vec![0, 2]))? {
        println!("dim {} (sigma {:.3})", g.dim_index, g.sigma[g.dim_index]);
        for (off, z) in g.offsets.iter().zip(&g.values) {
            println!("  {off:+.3}  {z:.3?}");
        }
    }
    let plane = pairwise_plane(&model, 0, 1, 3)?;
    println!("3x3 plane over dims 0,1: corner {:.3?}", plane[2][2]);
    Ok(())
}

//! Stratified k-fold evaluation of the one-class scorer.
//!
//! Usage: cargo run --release --example crossval_report [shift] [folds]

use latent_occ::eval::{crossval_occ, CrossvalConfig};
use latent_occ::fixture::{generate, Preset};
use latent_occ::io::Report;

fn main() -> latent_occ::Result<()> {
    let mut args = std::env::args().skip(1);
    let shift = args.next().and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let folds = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let ds = generate(&Preset::two_class(600, 8, shift), 1)?;
    let report = crossval_occ(&ds, &CrossvalConfig { folds, seed: 1, ..Default::default() })?;
    print!("{}", report.render_text());
    Ok(())
}

//! Generate a fixture, write it as JSONL and CSV, read it back and fold it.
//!
//! Usage: cargo run --example fixture_io [out_dir]

use std::path::PathBuf;

use latent_occ::fixture::{generate, Preset};
use latent_occ::io::{read_dataset, stratified_kfold, write_dataset, Format, Provenance};

fn main() -> latent_occ::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let preset = Preset::k_blobs(3, 90, 4, 4.0);
    let ds = generate(&preset, 4)?;
    let prov = Provenance::for_config(&preset);
    for format in [Format::Jsonl, Format::Csv] {
        let path = dir.join(format!("blobs.{}", if format == Format::Jsonl { "jsonl" } else { "csv" }));
        write_dataset(&path, &ds, format, Some(&prov))?;
        let back = read_dataset(&path, format)?;
        println!("{}: {} records, dim {}, labels {:?}", path.display(), back.len(), back.dim(), back.label_set());
    }
    let split = stratified_kfold(&ds, 3, 4)?;
    println!("fold sizes: {:?}", (0..3).map(|f| split.assignments.iter().filter(|&&a| a == f).count()).collect::<Vec<_>>());
    Ok(())
}

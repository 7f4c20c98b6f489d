//! Monte-Carlo audit of the KL-to-prior decomposition and the objective values.
//!
//! Usage: cargo run --release --example elbo_audit [samples] [beta]

use latent_occ::elbo::{audit, objective_value, Objective};
use latent_occ::fixture::{generate, Preset};
use latent_occ::io::Report;

fn main() -> latent_occ::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let beta = args.next().and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let ds = generate(&Preset::two_class(200, 4, 1.0), 2)?;
    let a = audit(&ds, samples, beta, 2)?;
    print!("{}", a.render_text());
    let recon = -50.0;
    for obj in [Objective::Vae, Objective::BetaVae, Objective::BetaTcvae] {
        println!("{obj:?} with recon {recon}: {:.4}", objective_value(&a, recon, obj, beta));
    }
    Ok(())
}

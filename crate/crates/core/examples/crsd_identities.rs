//! Reference-set distances: worked examples and the identity checks.
//!
//! Usage: cargo run --release --example crsd_identities

use latent_occ::crsd::{crsd, crsd_set, jeffreys, verify_identities, IdentityConfig, ProfileMatrix};
use latent_occ::gaussian::{kl, DiagGaussian};
use latent_occ::io::Report;

fn main() -> latent_occ::Result<()> {
    let p = DiagGaussian::new(vec![0.0], vec![1.0])?;
    let q = DiagGaussian::new(vec![1.0], vec![1.0])?;
    let r = DiagGaussian::new(vec![0.5], vec![1.0])?;
    println!("d(p,q;p)     = {:.6}  KL(p||q) = {:.6}", crsd(&p, &q, &p)?, kl(&p, &q)?);
    println!("d(p,q;{{p,q}}) = {:.6}  2*D_J    = {:.6}", crsd_set(&p, &q, &[p.clone(), q.clone()])?, 2.0 * jeffreys(&p, &q)?);
    println!("d(p,q;r) with r halfway = {:.6}", crsd(&p, &q, &r)?);

    let posts = vec![p, q, r];
    let m = ProfileMatrix::build(&posts, &posts)?;
    println!("profile distance (0,1) with R = all: {:.6}", m.distance(0, 1));

    let report = verify_identities(&IdentityConfig {
        trials: 200,
        jsd_trials: 20,
        jsd_samples: 2000,
        ..Default::default()
    })?;
    print!("{}", report.render_text());
    Ok(())
}

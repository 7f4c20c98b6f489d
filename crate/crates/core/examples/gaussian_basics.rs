//! Closed-form entropy, cross-entropy and KL for diagonal and full Gaussians.
//!
//! Usage: cargo run --example gaussian_basics

use latent_occ::gaussian::{cross_entropy, entropy, kl, DiagGaussian, FullGaussian};
use nalgebra::DMatrix;

fn main() -> latent_occ::Result<()> {
    let p = DiagGaussian::new(vec![0.0, 1.0], vec![1.0, 0.5])?;
    let q = DiagGaussian::standard(2)?;
    println!("H(p)      = {:.6}", entropy(&p));
    println!("CE(p, q)  = {:.6}", cross_entropy(&p, &q)?);
    println!("KL(p||q)  = {:.6}", kl(&p, &q)?);
    println!("KL(q||p)  = {:.6}", kl(&q, &p)?);

    // Same KL through the full-covariance path.
    let f = p.to_full()?;
    println!("KL(full)  = {:.6}", kl(&f, &q)?);

    // A nearly singular covariance is stabilised by jitter.
    let s = FullGaussian::new(vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]))?;
    println!("jitter on rank-1 covariance = {:e}", s.jitter_applied());
    println!("log N(0; 0, S)              = {:.6}", s.log_density(&[0.0, 0.0])?);
    Ok(())
}

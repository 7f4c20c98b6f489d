pub mod cluster;
pub mod crsd;
pub mod elbo;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod gaussian;
pub mod io;
pub mod occ;
pub mod pipeline;
pub mod traverse;

pub use error::{Error, Result};

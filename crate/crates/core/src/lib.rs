//! Finite-state tools for the spectral gaps of the random walk and the
//! interchange process on weighted graphs, with lattice-geometry bounds
//! on box-like vertex sets.

pub mod error;
pub mod hjkn;
mod lanczos;
pub mod lattice;
pub mod operators;
pub mod perm;
pub mod rates;
pub mod spectral;
pub mod tolerances;
pub mod trace;

pub use error::{Error, Result};

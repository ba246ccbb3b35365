//! Numerical laboratory for the Robin boundary-value problem on voxel domains.
//!
//! The crate discretizes `−Δu = 0` with Robin, Neumann or Dirichlet boundary
//! conditions on balls and pre-fractal bumped cubes, computes discrete Green
//! functions and harmonic measures, and evaluates the total-flow curve `F(a)`
//! of the lung model together with diagnostics for its regimes.

pub mod cli;
pub mod discretize;
pub mod error;
pub mod fit;
pub mod flux;
pub mod geometry;
pub mod green;
pub mod measure;
pub mod output;
pub mod solve;

pub use error::{Error, Result};

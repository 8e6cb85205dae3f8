//! Critical two-dimensional Ising model in a small external field.
//!
//! The crate combines exact enumeration on small graphs, cluster Monte Carlo
//! on the lattice extended by a ghost vertex, estimators for the observables
//! that control the magnetization `⟨σ₀⟩ ≍ h^{1/15}` at `β_c`, and weighted
//! power-law fits.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod fit;
pub mod fk;
pub mod mc;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Boundary, Geometry, LatticeSpec, ModelParams, SpinConfig, BETA_C};
pub use stats::Estimate;

//! Weighted fractional calculus on periodic grids.
//!
//! Fourier-multiplier realizations of the Riesz fractional gradient and
//! divergence, Riesz and Bessel potentials, Muckenhoupt weight estimators,
//! measurable versions of the weighted Sobolev, Poincaré and
//! Gagliardo–Nirenberg inequalities, and solvers for
//! `-div^s(w |∇^s u|^{p-2} ∇^s u) = f` with exterior data.

pub mod error;
pub mod fracops;
pub mod grid;
pub mod inequalities;
pub mod io;
pub mod solver;
pub mod suite;
pub mod weights;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use grid::{Grid, GridSpec, ScalarField, SpectralField, VectorField};

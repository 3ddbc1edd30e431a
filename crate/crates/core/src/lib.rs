//! Pseudo-spectral simulation of the stochastic convective Brinkman-Forchheimer
//! equations on a periodic box, with the diagnostics needed to study their
//! pullback random attractors.

pub mod attractor;
pub mod config;
pub mod constants;
pub mod cutoff;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod io;
pub mod integrator;
pub mod manifest;
pub mod ou;

pub use error::{Error, Result};
pub use field::{FieldNorms, PhysicalField, ScalarField, SpectralField};
pub use grid::Grid;

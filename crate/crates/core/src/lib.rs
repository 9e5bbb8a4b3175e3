//! Floquet spectral analysis for one-dimensional Schrödinger operators
//! −y″ + V(t)y with 1-periodic real symmetric matrix potentials.

pub mod error;
pub mod potential;
mod dense;
pub mod monodromy;
pub mod lyapunov;
pub mod roots;
pub mod spectrum;
pub mod quasimomentum;
pub mod oracle;
pub mod corpus;
pub mod cli;

pub use error::{Error, Result};
pub use potential::PeriodicMatrixPotential;

pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;

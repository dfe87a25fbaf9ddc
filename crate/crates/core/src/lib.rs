//! Kicked harmonic oscillators in phase-space lattices.
//!
//! Single-particle band structure of the rotating-wave Hamiltonian,
//! dissipative stroboscopic dynamics through the characteristic function,
//! phase-space interaction potentials, and classical many-body dynamics.

pub mod bands;
pub mod classical;
pub mod cli;
pub mod dissipative;
pub mod error;
pub mod grid;
pub mod interaction;
pub mod lattice;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

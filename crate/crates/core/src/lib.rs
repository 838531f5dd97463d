//! Coupled coherent states (CCS) dynamics of a quartic double well
//! bilinearly coupled to a finite harmonic bath, with grid-based
//! reference solvers.

pub mod config;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod propagator;
pub mod reference;
pub mod runner;
pub mod sampler;

pub use error::{Error, Result};
pub use num_complex::Complex64;

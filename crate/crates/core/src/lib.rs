//! Pseudospectral stochastic Navier–Stokes on the 2-torus with rapidly
//! oscillating random coefficients, and a Monte Carlo harness comparing the
//! oscillating system with its homogenized constant-coefficient limit.

pub mod config;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod io;
pub mod media;
pub mod noise;
pub mod nonlinear;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::{GridField, ModeIndex, SpectralField};

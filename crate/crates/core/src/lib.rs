//! Radial finite-difference laboratory for the energy-critical wave equation
//! `u_tt - Δu = ζ φ(x) |u|^{p_c-1} u` in dimensions 3, 4 and 5.

pub mod classifier;
pub mod coefficients;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod hyperbolic;
pub mod initial_data;

pub use error::{Error, Result};

//! Simulation and analysis of the nonlocal aggregation–diffusion equation
//! `∂ₜρ = εΔρᵐ + ∇·(ρ∇(W∗ρ))` on periodic lattices.

pub mod convolution;
pub mod energy;
pub mod error;
pub mod grid;
pub mod harness;
pub mod integrator;
pub mod kernels;
pub mod quadrature;
pub mod stationary;
pub mod steiner;
mod tridiag;

pub use error::{Error, Result};

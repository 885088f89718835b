//! Cyber-risk principal-agent contracting under volatility ambiguity.
//!
//! The crate simulates the controlled SIR-price jump-diffusion, evaluates the
//! agent Hamiltonians, solves the principal's integro-HJBI equation with a
//! monotone explicit finite-difference scheme and verifies the resulting
//! contract by Monte Carlo.

pub mod error;
pub mod hamiltonian;
pub mod cli;
pub mod contract;
pub mod hjbi;
pub mod model;
pub mod scenario;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use model::{CyberState, ModelParams};

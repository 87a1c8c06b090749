//! Spectral tools for multiply-periodic multi-time Hamilton equations.

pub mod action;
pub mod cli;
pub mod error;
pub mod fields;
pub mod hamiltonian;
pub mod inequalities;
pub mod phase;
pub mod solver;

pub use error::{PolyhamError, Result};

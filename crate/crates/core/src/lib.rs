//! Noisy voter model on finite graphs.
//!
//! The crate provides the spin dynamics and an event-driven simulator, the
//! grand coupling of two copies with its disagreement process, exact
//! finite-state analysis of both chains (stationary laws, uniformization,
//! total-variation mixing times), strong-spatial-mixing scans on lattice
//! boxes, reversibility checks, and fitting utilities for decay curves.

pub mod analysis;
pub mod cli;
pub mod coupling;
pub mod ctmc;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod reversibility;
pub mod rng;
pub mod ssm;
pub mod symmetry;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits (exact round trip).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

//! Generalized bathtub model of network trip flows.
//!
//! The master state is `K(t, x)`, the number of active trips whose remaining
//! distance is at least `x`. Everything else (trip count, out-flux, remaining
//! distance statistics, travel times) is derived from it.
//!
//! Modules:
//! - [`diagrams`]: network fundamental diagrams.
//! - [`demand`]: in-flux profiles, trip-distance distributions, initial conditions.
//! - [`solver`]: the integral and characteristic schemes, K reconstruction,
//!   multi-commodity and mobility-service wrappers.
//! - [`special`]: Vickrey's exponential model, deterministic distances and the
//!   constant-distance z-grid method.
//! - [`analysis`]: stationary states, gridlock, travel times, audits and
//!   convergence studies.

pub mod analysis;
pub mod demand;
pub mod diagrams;
mod error;
pub mod pwl;
pub mod solver;
pub mod special;

pub use error::{Error, Result};

//! Special cases with dedicated solvers: Vickrey's exponential model,
//! deterministic trip distances and constant trip distances.

mod constant;
mod deterministic;
mod vickrey;

pub use constant::{delay_formulation_check, solve_constant_distance, ConstantDistanceSolution, DelayResiduals, TripFrame};
pub use deterministic::{classify_regime, solve_deterministic, DeterministicConfig, Regime, RegimeSegment};
pub use vickrey::{integral_outflow, solve_vickrey, vickrey_equivalence_check, EquivalenceReport, VickreyConfig};

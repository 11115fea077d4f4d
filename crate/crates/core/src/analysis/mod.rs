//! Stationary states, gridlock, travel times, conservation audits and
//! convergence studies on top of solved runs.

mod audit;
mod convergence;
mod stationary;
mod travel;

pub use audit::{audit, AuditReport, AuditRow};
pub use convergence::{convergence_study, order_from_values, time_to_distance, ConvergenceReport};
pub use stationary::{
    diversion_outflux, gridlock_predict, stability_classify, stationary_state, GridlockPrediction, Stability,
    StationaryOutcome, StationaryState,
};
pub use travel::{average_travel_time, trip_travel_time, TravelTimes};

use std::thread;

use crate::error::{invalid, Error, Result};
use crate::solver::Trajectory;

/// Outcome of a grid-refinement study of one scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
    /// `|s_k - s_{k+1}| / |s_{k+1} - s_{k+2}|`.
    pub ratios: Vec<f64>,
    /// `log2` of the ratios, when the differences shrink monotonically.
    pub orders: Option<Vec<f64>>,
    pub mean_order: Option<f64>,
    /// All levels agree to round-off; no order is estimated.
    pub exact: bool,
}

/// Runs `target` at each grid level (concurrently) and estimates the order
/// of convergence from successive differences. Levels must halve.
pub fn convergence_study<F>(levels: &[f64], target: F) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if levels.len() < 3 {
        return Err(invalid("levels", "at least three grid levels are required"));
    }
    if levels.windows(2).any(|w| (w[0] - 2.0 * w[1]).abs() > 1e-12 * w[0]) {
        return Err(invalid("levels", "each level must halve the previous one"));
    }
    let values: Vec<f64> = thread::scope(|scope| {
        let target = &target;
        let handles: Vec<_> = levels.iter().map(|&h| scope.spawn(move || target(h))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Consistency("a refinement level panicked".into()))))
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(order_from_values(levels.to_vec(), values))
}

/// Order estimate from already computed values at halving levels.
pub fn order_from_values(levels: Vec<f64>, values: Vec<f64>) -> ConvergenceReport {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let exact = diffs.iter().all(|d| d.abs() <= 1e-12 * scale);
    let ratios: Vec<f64> = diffs.windows(2).map(|w| w[0].abs() / w[1].abs()).collect();
    let monotone = !exact
        && diffs.iter().all(|d| d.abs() > 1e-12 * scale)
        && diffs.windows(2).all(|w| w[0].signum() == w[1].signum());
    let orders = monotone.then(|| ratios.iter().map(|r| r.log2()).collect::<Vec<f64>>());
    let mean_order = orders.as_ref().map(|o| o.iter().sum::<f64>() / o.len() as f64);
    ConvergenceReport { levels, values, ratios, orders, mean_order, exact }
}

/// Time at which the cumulative travel distance reaches `z`.
pub fn time_to_distance(traj: &Trajectory, z: f64) -> Result<f64> {
    traj.time_at_distance(z)
        .ok_or(Error::NotCompleted { remaining: z - traj.final_distance() })
}

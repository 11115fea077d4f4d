use crate::demand::{DistanceDistribution, DistanceSlice};
use crate::error::{check_non_negative, Error, Result};
use crate::solver::Trajectory;

/// Survival below which an exponential tail counts as finished.
const TAIL_EPS: f64 = 1e-9;

/// `Upsilon(t, x) = tau(x + z(t)) - t` for a trip of `x` miles entering at `t`.
pub fn trip_travel_time(traj: &Trajectory, t_enter: f64, x: f64) -> Result<f64> {
    check_non_negative("trip distance", x)?;
    let z = traj.distance_at(t_enter)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let target = z + x;
    let tau = traj
        .time_at_distance(target)
        .ok_or(Error::NotCompleted { remaining: target - traj.final_distance() })?;
    Ok((tau - t_enter).max(0.0))
}

/// Exact and approximate average travel times of trips entering at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelTimes {
    /// `int Phi~(t, x) / v(tau(x + z(t))) dx`.
    pub exact: f64,
    /// `B~(t) / v(t)`.
    pub approx_entry: f64,
    /// `B~(t) / v(tau(z(t) + B~(t)))`.
    pub approx_exit: f64,
}

fn support_end(slice: &DistanceSlice) -> f64 {
    match *slice {
        DistanceSlice::Exponential(b) => b * (1.0 / TAIL_EPS).ln(),
        DistanceSlice::Deterministic(b) => b,
        DistanceSlice::Uniform(b) => 2.0 * b,
        DistanceSlice::Tabulated { .. } => {
            let mut x = slice.mean().max(1e-9);
            while slice.survival(x) > TAIL_EPS {
                x *= 2.0;
            }
            x
        }
    }
}

/// Average travel time of trips entering at `t_enter`.
///
/// The speed is constant on each solver step, so the exact integral is summed
/// step by step with the closed-form integral of the survival function.
pub fn average_travel_time(traj: &Trajectory, dist: &DistanceDistribution, t_enter: f64) -> Result<TravelTimes> {
    let s = &traj.series;
    let z = traj.distance_at(t_enter)?;
    let slice = dist.slice(t_enter);
    let mean = slice.mean();
    let end = z + support_end(&slice);
    if end > traj.final_distance() || z + mean > traj.final_distance() {
        return Err(Error::NotCompleted { remaining: end - traj.final_distance() });
    }
    let mut exact = 0.0;
    for k in 1..s.len() {
        let (a, b) = (s.z[k - 1].max(z), s.z[k].min(end));
        let dz = s.z[k] - s.z[k - 1];
        if b <= a || dz <= 0.0 {
            continue;
        }
        let speed = dz / (s.t[k] - s.t[k - 1]);
        exact += (slice.tail_integral(a - z) - slice.tail_integral(b - z)) / speed;
    }
    let v_entry = traj.sample(&s.v, t_enter);
    let t_exit = traj
        .time_at_distance(z + mean)
        .ok_or(Error::NotCompleted { remaining: z + mean - traj.final_distance() })?;
    let v_exit = traj.sample(&s.v, t_exit);
    Ok(TravelTimes { exact, approx_entry: mean / v_entry, approx_exit: mean / v_exit })
}

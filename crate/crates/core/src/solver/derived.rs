use super::{BathtubState, Trajectory};
use crate::error::{Error, Result};

/// `K(t, x)` rebuilt from the initial profile and the entry log:
/// `K(0, x + z(t)) + sum over settled entries of mass * Phi~(t_s, x + z(t) - z_s)`.
pub fn reconstruct_k(traj: &Trajectory, t: f64, x: f64) -> Result<f64> {
    let model = traj
        .model
        .as_ref()
        .ok_or_else(|| Error::Undefined("trajectory carries no entry log".into()))?;
    let (dx, x_max) = traj
        .x_grid
        .ok_or_else(|| Error::Undefined("trajectory has no distance grid".into()))?;
    if !(0.0..=x_max).contains(&x) {
        return Err(Error::Range { what: "x", value: x, lo: 0.0, hi: x_max });
    }
    let z = traj.distance_at(t)?;
    let tol = 1e-9 * dx;
    let clip = |r: f64| r <= x_max + tol;
    let y = x + z;
    let mut total = if clip(y) { model.ic.profile(y) } else { 0.0 };
    let t_cut = t + 1e-12 * t.abs().max(1.0);
    for e in traj.entries.iter().take_while(|e| e.settled_at <= t_cut) {
        let r = y - e.z;
        if clip(r) {
            total += e.mass * model.distance.slice(e.t).survival(r.max(0.0));
        }
    }
    Ok(total)
}

/// Out-flux estimates for a solved run.
#[derive(Debug, Clone, PartialEq)]
pub struct OutfluxEstimates {
    /// `(G(t_{j+1}) - G(t_j)) / dt_j`, consistent with the cumulative out-flow.
    pub primary: Vec<f64>,
    /// `k(t, 0) v(t)` with `k(t, 0) ~ (K[0] - K[1]) / dx`, at stored profiles: `(t, g)`.
    pub kinematic: Vec<(f64, f64)>,
}

pub fn outflux_series(traj: &Trajectory) -> OutfluxEstimates {
    let kinematic = traj
        .states
        .iter()
        .filter(|st| st.k.len() > 1)
        .map(|st| (st.t, (st.k[0] - st.k[1]) / st.dx * st.v))
        .collect();
    OutfluxEstimates { primary: traj.series.g.clone(), kinematic }
}

/// Remaining-distance statistics of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainingDistanceStats {
    /// Mean remaining distance `B(t)`.
    pub mean: f64,
    /// `Phi(t, x) = K(t, x) / lambda` on the state's grid.
    pub survival: Vec<f64>,
    /// Density of remaining distances at zero, `phi(t, 0)`.
    pub density_at_zero: f64,
}

pub fn remaining_distance_stats(state: &BathtubState) -> Result<RemainingDistanceStats> {
    if !(state.lambda > 0.0) {
        return Err(Error::Undefined("no active trips".into()));
    }
    if state.k.len() < 2 {
        return Err(Error::Undefined("state has no distance grid".into()));
    }
    let survival: Vec<f64> = state.k.iter().map(|k| k / state.lambda).collect();
    let mean = survival.windows(2).map(|w| 0.5 * (w[0] + w[1]) * state.dx).sum();
    let density_at_zero = (survival[0] - survival[1]) / state.dx;
    Ok(RemainingDistanceStats { mean, survival, density_at_zero })
}

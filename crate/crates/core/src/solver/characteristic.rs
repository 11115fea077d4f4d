use super::{
    check_truncation, is_snapshot, BathtubState, Entry, ReconstructionModel, Scenario, Scheme, Series, Termination,
    Trajectory,
};
use crate::error::{Error, Result};

/// Characteristic scheme on the remaining-distance grid.
///
/// Each step lasts `dt = dx / v`, so every trip moves exactly one cell and
/// `z(t_j) = j dx`. Entering trips are added with
/// `K_i <- K_{i+1} + f(t_j) Phi~(t_j, i dx) dt`; the top cell only receives
/// new trips, so longer trips are clamped to `X`.
pub fn solve_characteristic(s: &Scenario) -> Result<Trajectory> {
    s.validate()?;
    let grid = &s.grid;
    let dx = grid.dx();
    let n = grid.intervals();
    let x_max = grid.x_max();
    let stride = grid.snapshot_every().unwrap_or(1);

    let mut k: Vec<f64> = (0..=n).map(|i| s.ic.profile(i as f64 * dx)).collect();
    let lambda0 = k[0];
    let mut truncated = s.ic.beyond(x_max);
    let mut series = Series::default();
    let mut states = Vec::new();
    let mut entries = Vec::new();
    let (mut t, mut cum_in, mut cum_out) = (0.0, 0.0, 0.0);
    let mut j = 0usize;

    let termination = loop {
        let z = j as f64 * dx;
        let lambda = k[0];
        let v = s.fd.speed_at(lambda / s.lane_miles);
        let f = s.influx.rate_at(t);
        series.push(t, z, lambda, v, f, cum_in, cum_out);
        if is_snapshot(j, stride) {
            states.push(BathtubState { t, z, lambda, v, dx, k: k.clone() });
        }
        if grid.horizon().reached(t, z) {
            break Termination::HorizonReached;
        }
        if v < grid.v_min() {
            break Termination::Gridlock;
        }
        let dt = dx / v;
        if grid.horizon().overshoots(t, dt) {
            break Termination::HorizonReached;
        }
        if j >= grid.max_steps() {
            return Err(Error::StepLimit(grid.max_steps()));
        }

        let mass = f * dt;
        let slice = s.distance.slice(t);
        let exits = k[0] - k[1];
        for i in 0..n {
            k[i] = k[i + 1] + mass * slice.survival(i as f64 * dx);
        }
        k[n] = mass * slice.survival(x_max);
        truncated += mass * slice.exceedance(x_max);

        let t_next = t + dt;
        j += 1;
        entries.push(Entry { t, z: j as f64 * dx, mass, settled_at: t_next });
        t = t_next;
        cum_in += mass;
        cum_out += exits;
    };

    if states.last().map(|st| st.t) != Some(t) {
        let last = series.len() - 1;
        states.push(BathtubState {
            t,
            z: series.z[last],
            lambda: k[0],
            v: series.v[last],
            dx,
            k,
        });
    }
    series.finish();
    check_truncation(grid, truncated, lambda0 + cum_in)?;

    Ok(Trajectory {
        scheme: Scheme::Characteristic,
        series,
        states,
        entries,
        lane_miles: s.lane_miles,
        x_grid: Some((dx, x_max)),
        truncated_mass: truncated,
        termination,
        model: Some(ReconstructionModel { ic: s.ic.clone(), distance: s.distance.clone() }),
    })
}

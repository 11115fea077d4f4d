use super::deterministic::DeterministicConfig;
use crate::demand::{DistanceDistribution, InitialCondition};
use crate::error::{invalid, Error, Result};
use crate::solver::{interpolate, BathtubState, Entry, ReconstructionModel, Scheme, Series, Termination, Trajectory};

/// Number of trip ranks sampled by [`TripFrame::sample_ranks`].
const RANK_SAMPLES: usize = 200;

/// Cumulative-count, passing-time and position views of a constant-distance run.
#[derive(Debug, Clone)]
pub struct TripFrame {
    /// Trip distance `B`.
    pub distance: f64,
    pub lambda0: f64,
    ic: InitialCondition,
    /// `tau_j` on the z-grid.
    pub tau: Vec<f64>,
    /// `z_j = j dz`.
    pub z: Vec<f64>,
    /// `F(tau_j)`.
    pub cum_in: Vec<f64>,
}

impl TripFrame {
    fn z_final(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    /// `z(t)`; `None` outside the solved range.
    pub fn distance_at(&self, t: f64) -> Option<f64> {
        (t >= 0.0 && t <= self.tau[self.tau.len() - 1]).then(|| interpolate(&self.tau, &self.z, t))
    }

    /// `tau(y)`; `None` beyond the solved range.
    pub fn time_at(&self, y: f64) -> Option<f64> {
        (y >= 0.0 && y <= self.z_final()).then(|| interpolate(&self.z, &self.tau, y))
    }

    /// `F(tau(y))`, zero for `y < 0`.
    fn cum_in_at(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            interpolate(&self.z, &self.cum_in, y)
        }
    }

    /// Travel time of the trip entering at `t`, `tau(z(t) + B) - t`.
    pub fn travel_time_entering(&self, t: f64) -> Option<f64> {
        let z = self.distance_at(t)?;
        Some(self.time_at(z + self.distance)? - t)
    }

    /// Travel time of the trip leaving at `t`, `t - tau(z(t) - B)`.
    pub fn travel_time_exiting(&self, t: f64) -> Option<f64> {
        let z = self.distance_at(t)?;
        Some(t - self.time_at(z - self.distance)?)
    }

    /// `N(t, x)`: trips that have passed remaining distance `x` by `t`,
    /// counted from the initial trips at distance `B`.
    pub fn passed(&self, t: f64, x: f64) -> Option<f64> {
        let z = self.distance_at(t)?;
        Some(self.lambda0 - self.ic.profile(x + z) + self.cum_in_at(x + z - self.distance))
    }

    /// Cumulative distance at which entering trip `n` (ranked after the initial trips) entered.
    fn entry_distance(&self, n: f64) -> Option<f64> {
        let m = n - self.lambda0;
        let last = self.cum_in[self.cum_in.len() - 1];
        if m < 0.0 || m > last {
            return None;
        }
        let k = self.cum_in.partition_point(|&c| c < m);
        if k == 0 {
            return Some(0.0);
        }
        let (c0, c1) = (self.cum_in[k - 1], self.cum_in[k]);
        Some(self.z[k - 1] + (m - c0) / (c1 - c0) * (self.z[k] - self.z[k - 1]))
    }

    /// `X(t, n)`: remaining distance of trip `n` at `t`, if it is active.
    pub fn position(&self, t: f64, n: f64) -> Option<f64> {
        let y = self.entry_distance(n)?;
        let z = self.distance_at(t)?;
        let x = self.distance - (z - y);
        (z >= y && x >= 0.0).then_some(x)
    }

    /// `T(n, x)`: time at which trip `n` has `x` miles left.
    pub fn passing_time(&self, n: f64, x: f64) -> Option<f64> {
        if !(0.0..=self.distance).contains(&x) {
            return None;
        }
        let y = self.entry_distance(n)?;
        self.time_at(self.distance - x + y)
    }

    /// Evenly spaced ranks over the entering trips.
    pub fn sample_ranks(&self) -> Vec<f64> {
        let total = self.cum_in[self.cum_in.len() - 1];
        (1..=RANK_SAMPLES).map(|k| self.lambda0 + total * k as f64 / RANK_SAMPLES as f64).collect()
    }

    /// Longest z-grid time step, the resolution of the time maps.
    pub fn max_time_step(&self) -> f64 {
        self.tau.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantDistanceSolution {
    pub trajectory: Trajectory,
    pub frame: TripFrame,
}

/// Constant trip distance `B` on the z-grid with `I = B / dz` cells:
/// `dtau_j = dz / V(lambda_j / L)`, `F_{j+1} = F_j + f(tau_j) dtau_j`,
/// `lambda_{j+1} = K(0, z_{j+1}) + F_{j+1} - F_{j+1-I}`.
pub fn solve_constant_distance(c: &DeterministicConfig) -> Result<ConstantDistanceSolution> {
    c.validate()?;
    if !c.mean.is_constant() {
        return Err(invalid("Btilde", "the constant-distance method needs a time-independent distance"));
    }
    let distance = c.mean.eval(0.0);
    let dz = c.dz;
    let ratio = distance / dz;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
        return Err(invalid("dz", format!("trip distance {distance} is not a multiple of dz = {dz}")));
    }
    let cells = ratio.round() as usize;
    if c.ic.beyond(distance * (1.0 + 1e-12)) > 0.0 {
        return Err(invalid("initial condition", "initial trips may not be longer than the trip distance"));
    }
    let lambda0 = c.ic.lambda0();
    let mut series = Series::default();
    let mut states = Vec::new();
    let mut entries = Vec::new();
    let mut tau = vec![0.0];
    let mut cum_in = vec![0.0];
    let mut lambda = lambda0;
    let mut j = 0usize;

    let termination = loop {
        let z = j as f64 * dz;
        let t = tau[j];
        let v = c.fd.speed_at(lambda / c.lane_miles);
        let f = c.influx.rate_at(t);
        series.push(t, z, lambda, v, f, cum_in[j], lambda0 + cum_in[j] - lambda);
        let k = (0..=cells)
            .map(|i| {
                let back = (i + j).checked_sub(cells).map_or(0.0, |m| cum_in[m]);
                c.ic.profile(z + i as f64 * dz) + cum_in[j] - back
            })
            .collect();
        states.push(BathtubState { t, z, lambda, v, dx: dz, k });
        if c.horizon.reached(t, z) {
            break Termination::HorizonReached;
        }
        if v < c.v_min {
            break Termination::Gridlock;
        }
        let dtau = dz / v;
        if c.horizon.overshoots(t, dtau) {
            break Termination::HorizonReached;
        }
        if j >= c.max_steps {
            return Err(Error::StepLimit(c.max_steps));
        }
        entries.push(Entry { t, z, mass: f * dtau, settled_at: t + dtau });
        tau.push(t + dtau);
        cum_in.push(cum_in[j] + dtau * f);
        j += 1;
        let back = (j + 1).checked_sub(cells + 1).map_or(0.0, |m| cum_in[m]);
        lambda = c.ic.profile(j as f64 * dz) + cum_in[j] - back;
    };
    series.finish();
    let frame = TripFrame {
        distance,
        lambda0,
        ic: c.ic.clone(),
        tau,
        z: series.z.clone(),
        cum_in: series.cum_in.clone(),
    };
    let trajectory = Trajectory {
        scheme: Scheme::ConstantDistanceZGrid,
        series,
        states,
        entries,
        lane_miles: c.lane_miles,
        x_grid: Some((dz, distance)),
        truncated_mass: 0.0,
        termination,
        model: Some(ReconstructionModel { ic: c.ic.clone(), distance: DistanceDistribution::deterministic(c.mean.clone())? }),
    };
    Ok(ConstantDistanceSolution { trajectory, frame })
}

/// Residuals of the delay formulation on a constant-distance run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayResiduals {
    /// `max |N(0, B) + F(t) - G(t + U(t))|`.
    pub cumulative: f64,
    /// `max |int_t^{t + U(t)} v ds - B|` with the trapezoid rule on the speed series.
    pub distance: f64,
    /// Number of sampled entry times.
    pub samples: usize,
}

/// Checks the cumulative-count and travel-distance identities at every
/// stored step whose trips finish within the run.
pub fn delay_formulation_check(sol: &ConstantDistanceSolution) -> DelayResiduals {
    let s = &sol.trajectory.series;
    let fr = &sol.frame;
    let mut out = DelayResiduals { cumulative: 0.0, distance: 0.0, samples: 0 };
    for j in 0..s.len() {
        let t = s.t[j];
        let Some(delay) = fr.travel_time_entering(t) else { continue };
        let t_exit = t + delay;
        let g_exit = interpolate(&s.t, &s.cum_out, t_exit);
        out.cumulative = out.cumulative.max((fr.lambda0 + s.cum_in[j] - g_exit).abs());
        out.distance = out.distance.max((trapezoid_speed(&s.t, &s.v, t, t_exit) - fr.distance).abs());
        out.samples += 1;
    }
    out
}

/// `int_a^b v dt` with linear interpolation of the speed samples.
fn trapezoid_speed(t: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..t.len() {
        let lo = a.max(t[k - 1]);
        let hi = b.min(t[k]);
        if hi > lo {
            total += 0.5 * (hi - lo) * (interpolate(t, v, lo) + interpolate(t, v, hi));
        }
    }
    total
}

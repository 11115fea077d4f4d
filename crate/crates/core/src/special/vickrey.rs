use crate::demand::{DistanceDistribution, InfluxProfile, InitialCondition};
use crate::diagrams::FundamentalDiagram;
use crate::error::{invalid, Error, Result};
use crate::solver::{
    check_lane_miles, interpolate, Horizon, ReconstructionModel, Scenario, Scheme, Series, Termination, Trajectory, DEFAULT_V_MIN,
};

/// Vickrey's model: exponential trip distances with a fixed mean.
#[derive(Debug, Clone)]
pub struct VickreyConfig {
    pub lane_miles: f64,
    pub fd: FundamentalDiagram,
    /// Mean trip distance `B`.
    pub mean: f64,
    pub lambda0: f64,
    pub influx: InfluxProfile,
    pub dt: f64,
    pub horizon: Horizon,
    pub v_min: f64,
    pub max_steps: usize,
}

impl VickreyConfig {
    pub fn new(
        lane_miles: f64,
        fd: FundamentalDiagram,
        mean: f64,
        lambda0: f64,
        influx: InfluxProfile,
        dt: f64,
        horizon: Horizon,
    ) -> Result<Self> {
        let c = Self { lane_miles, fd, mean, lambda0, influx, dt, horizon, v_min: DEFAULT_V_MIN, max_steps: 50_000_000 };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        check_lane_miles(self.lane_miles)?;
        if !(self.mean > 0.0 && self.mean.is_finite()) {
            return Err(invalid("B", format!("must be positive, got {}", self.mean)));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(invalid("lambda0", format!("must be non-negative, got {}", self.lambda0)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Forward Euler for `lambda' = f - lambda V(lambda / L) / B`.
///
/// `G` accumulates `g = lambda v / B` with the same steps, so the total-trip
/// balance holds to round-off.
pub fn solve_vickrey(c: &VickreyConfig) -> Result<Trajectory> {
    c.validate()?;
    let mut series = Series::default();
    let (mut lambda, mut z, mut cum_in, mut cum_out) = (c.lambda0, 0.0, 0.0, 0.0);
    let mut n = 0usize;
    let termination = loop {
        let t = n as f64 * c.dt;
        let v = c.fd.speed_at(lambda / c.lane_miles);
        let f = c.influx.rate_at(t);
        series.push(t, z, lambda, v, f, cum_in, cum_out);
        if c.horizon.reached(t, z) {
            break Termination::HorizonReached;
        }
        if v < c.v_min {
            break Termination::Gridlock;
        }
        if c.horizon.overshoots(t, c.dt) {
            break Termination::HorizonReached;
        }
        if n >= c.max_steps {
            return Err(Error::StepLimit(c.max_steps));
        }
        let g = lambda * v / c.mean;
        lambda += c.dt * (f - g);
        z += v * c.dt;
        cum_in += f * c.dt;
        cum_out += g * c.dt;
        n += 1;
    };
    series.finish();
    let ic = if c.lambda0 > 0.0 { InitialCondition::exponential(c.lambda0, c.mean)? } else { InitialCondition::Empty };
    Ok(Trajectory {
        scheme: Scheme::VickreyEuler,
        series,
        states: Vec::new(),
        entries: Vec::new(),
        lane_miles: c.lane_miles,
        x_grid: None,
        truncated_mass: 0.0,
        termination,
        model: Some(ReconstructionModel { ic, distance: DistanceDistribution::exponential(c.mean)? }),
    })
}

/// Cumulative out-flow from its integral form,
/// `G(t) = (1 - e^{-z/B}) lambda0 + int_0^t f(s) (1 - e^{-(z(t) - z(s))/B}) ds`,
/// evaluated on the trajectory's own steps.
pub fn integral_outflow(traj: &Trajectory, mean: f64) -> Vec<f64> {
    let s = &traj.series;
    let lambda0 = s.lambda[0];
    (0..s.len())
        .map(|j| {
            let zj = s.z[j];
            let mut total = (1.0 - (-zj / mean).exp()) * lambda0;
            for i in 0..j {
                let mass = s.cum_in[i + 1] - s.cum_in[i];
                total += mass * (1.0 - (-(zj - s.z[i]) / mean).exp());
            }
            total
        })
        .collect()
}

/// Deviations of a generalized run from Vickrey's model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// `max |Phi(t, x) - e^{-x/B}|` over stored profiles with trips, on cells the grid resolves.
    pub profile_deviation: f64,
    /// `max |lambda_gen(t) - lambda_vickrey(t)|` over the common time range.
    pub lambda_deviation: f64,
}

/// Compares a generalized run with Vickrey's ODE for the same supply and demand.
/// The ODE uses the step `dx / u`.
pub fn vickrey_equivalence_check(scenario: &Scenario, traj: &Trajectory, mean: f64) -> Result<EquivalenceReport> {
    let x_max = traj.x_grid.map_or(f64::INFINITY, |g| g.1);
    let mut profile_deviation: f64 = 0.0;
    for st in &traj.states {
        if st.lambda <= 1e-12 {
            continue;
        }
        // Until trips enter, cells whose characteristic started beyond the
        // grid hold no information about the initial profile.
        let refilled = traj.entries.iter().any(|e| e.mass > 0.0 && e.settled_at <= st.t);
        let limit = if refilled { x_max } else { x_max - st.z };
        for (i, k) in st.k.iter().enumerate() {
            let x = i as f64 * st.dx;
            if x > limit + 1e-9 * st.dx {
                break;
            }
            profile_deviation = profile_deviation.max((k / st.lambda - (-x / mean).exp()).abs());
        }
    }
    let c = VickreyConfig::new(
        scenario.lane_miles,
        scenario.fd.clone(),
        mean,
        traj.lambda0(),
        scenario.influx.clone(),
        scenario.grid.dx() / scenario.fd.free_flow_speed(),
        Horizon::MaxTime(traj.final_time()),
    )?;
    let ode = solve_vickrey(&c)?;
    let t_end = ode.final_time();
    let lambda_deviation = traj
        .series
        .t
        .iter()
        .zip(&traj.series.lambda)
        .filter(|(t, _)| **t <= t_end)
        .map(|(t, l)| (l - interpolate(&ode.series.t, &ode.series.lambda, *t)).abs())
        .fold(0.0, f64::max);
    Ok(EquivalenceReport { profile_deviation, lambda_deviation })
}

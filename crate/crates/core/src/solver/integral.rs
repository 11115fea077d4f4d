use super::{
    check_lane_miles, check_truncation, is_snapshot, BathtubState, Entry, GridSpec, ReconstructionModel, Scenario,
    Scheme, Series, Termination, Trajectory,
};
use crate::demand::{DistanceDistribution, DistanceSlice, InfluxProfile, InitialCondition};
use crate::diagrams::ExtendedSpeedRelation;
use crate::error::{invalid, Error, Result};
use crate::pwl::PiecewiseLinear;

/// Default stride between stored K profiles for the integral scheme.
const INTEGRAL_SNAPSHOT_STRIDE: usize = 64;

/// Demand and initial condition of one commodity.
#[derive(Debug, Clone)]
pub struct Commodity {
    pub influx: InfluxProfile,
    pub distance: DistanceDistribution,
    pub ic: InitialCondition,
}

/// State handed to a speed relation at the start of a step.
#[derive(Debug, Clone, Copy)]
pub struct JointState<'a> {
    pub t: f64,
    pub lane_miles: f64,
    pub lambda: &'a [f64],
    pub influx: &'a [f64],
    /// Out-flux of the previous step.
    pub outflux: &'a [f64],
}

/// Where the vehicle density fed to an extended speed relation comes from.
#[derive(Debug, Clone)]
pub enum VehicleDensity {
    /// Given as a function of time.
    Exogenous(PiecewiseLinear),
    /// `lambda / L`, one vehicle per trip.
    FromTrips,
}

/// A single-commodity run under an extended speed relation.
#[derive(Debug, Clone)]
pub struct MobilityScenario {
    pub lane_miles: f64,
    pub relation: ExtendedSpeedRelation,
    pub density: VehicleDensity,
    pub commodity: Commodity,
    pub grid: GridSpec,
}

struct Track<'a> {
    c: &'a Commodity,
    slices: Vec<DistanceSlice<'a>>,
    entries: Vec<Entry>,
    series: Series,
    states: Vec<BathtubState>,
    z: f64,
    lambda: f64,
    lambda0: f64,
    cum_in: f64,
    cum_out: f64,
    truncated: f64,
}

impl<'a> Track<'a> {
    fn new(c: &'a Commodity, grid: &GridSpec) -> Self {
        let lambda0 = c.ic.profile(0.0);
        Self {
            c,
            slices: Vec::new(),
            entries: Vec::new(),
            series: Series::default(),
            states: Vec::new(),
            z: 0.0,
            lambda: lambda0,
            lambda0,
            cum_in: 0.0,
            cum_out: 0.0,
            truncated: c.ic.beyond(grid.x_max()),
        }
    }

    /// `K(t, x)` at the current step, built from the initial profile and settled entries.
    fn count_at_least(&self, x: f64, grid: &GridSpec) -> f64 {
        let y = x + self.z;
        let mut total = if grid.clip(y) { self.c.ic.profile(y) } else { 0.0 };
        for (e, slice) in self.entries.iter().zip(&self.slices) {
            let r = y - e.z;
            if grid.clip(r) {
                total += e.mass * slice.survival(r);
            }
        }
        total
    }

    fn snapshot(&self, t: f64, v: f64, grid: &GridSpec) -> BathtubState {
        let k: Vec<f64> = grid
            .x_grid()
            .into_iter()
            .map(|x| if x == 0.0 { self.lambda } else { self.count_at_least(x, grid) })
            .collect();
        BathtubState { t, z: self.z, lambda: self.lambda, v, dx: grid.dx(), k }
    }

    fn into_trajectory(mut self, lane_miles: f64, grid: &GridSpec, termination: Termination) -> Result<Trajectory> {
        self.series.finish();
        check_truncation(grid, self.truncated, self.lambda0 + self.cum_in)?;
        Ok(Trajectory {
            scheme: Scheme::Integral,
            series: self.series,
            states: self.states,
            entries: self.entries,
            lane_miles,
            x_grid: Some((grid.dx(), grid.x_max())),
            truncated_mass: self.truncated,
            termination,
            model: Some(ReconstructionModel { ic: self.c.ic.clone(), distance: self.c.distance.clone() }),
        })
    }
}

/// Shared time-stepping of the integral scheme for one or more commodities.
fn march(
    lane_miles: f64,
    commodities: &[Commodity],
    speed: &dyn Fn(usize, &JointState) -> f64,
    grid: &GridSpec,
    dt: f64,
) -> Result<Vec<Trajectory>> {
    let m = commodities.len();
    let stride = grid.snapshot_every().unwrap_or(INTEGRAL_SNAPSHOT_STRIDE);
    let mut tracks: Vec<Track> = commodities.iter().map(|c| Track::new(c, grid)).collect();
    let mut lambdas = vec![0.0; m];
    let mut rates = vec![0.0; m];
    let mut lagged_g = vec![0.0; m];
    let mut speeds = vec![0.0; m];
    let mut j = 0usize;

    let termination = loop {
        let t = j as f64 * dt;
        for (i, tr) in tracks.iter().enumerate() {
            lambdas[i] = tr.lambda;
            rates[i] = tr.c.influx.rate_at(t);
        }
        let joint = JointState { t, lane_miles, lambda: &lambdas, influx: &rates, outflux: &lagged_g };
        for (i, v) in speeds.iter_mut().enumerate() {
            *v = speed(i, &joint).max(0.0);
        }
        let snap = is_snapshot(j, stride);
        for (i, tr) in tracks.iter_mut().enumerate() {
            tr.series.push(t, tr.z, tr.lambda, speeds[i], rates[i], tr.cum_in, tr.cum_out);
            if snap {
                let st = tr.snapshot(t, speeds[i], grid);
                tr.states.push(st);
            }
        }
        if tracks.iter().all(|tr| grid.horizon().reached(t, tr.z)) {
            break Termination::HorizonReached;
        }
        if speeds.iter().all(|&v| v < grid.v_min()) {
            break Termination::Gridlock;
        }
        if grid.horizon().overshoots(t, dt) {
            break Termination::HorizonReached;
        }
        if j >= grid.max_steps() {
            return Err(Error::StepLimit(grid.max_steps()));
        }

        let t_next = (j + 1) as f64 * dt;
        for (i, tr) in tracks.iter_mut().enumerate() {
            let mass = rates[i] * dt;
            let slice = tr.c.distance.slice(t);
            tr.truncated += mass * slice.exceedance(grid.x_max());
            tr.entries.push(Entry { t, z: tr.z, mass, settled_at: t_next });
            tr.slices.push(slice);
            tr.z += speeds[i] * dt;
            let lambda = tr.count_at_least(0.0, grid);
            tr.cum_in += mass;
            let cum_out = tr.lambda0 + tr.cum_in - lambda;
            lagged_g[i] = (cum_out - tr.cum_out) / dt;
            tr.cum_out = cum_out;
            tr.lambda = lambda;
        }
        j += 1;
    };

    let t_end = tracks[0].series.t.last().copied().unwrap_or(0.0);
    for (i, tr) in tracks.iter_mut().enumerate() {
        if tr.states.last().map(|st| st.t) != Some(t_end) {
            let st = tr.snapshot(t_end, speeds[i], grid);
            tr.states.push(st);
        }
    }
    tracks.into_iter().map(|tr| tr.into_trajectory(lane_miles, grid, termination)).collect()
}

/// Integral scheme with a fixed time step:
/// `z^{j+1} = z^j + v^j dt` and
/// `lambda^{j+1} = K(0, z^{j+1}) + sum_{i<=j} f(t_i) Phi~(t_i, z^{j+1} - z^i) dt`.
///
/// Without an explicit `dt` the step defaults to `dx / u`.
pub fn solve_integral(s: &Scenario) -> Result<Trajectory> {
    s.validate()?;
    let dt = s.grid.dt().unwrap_or(s.grid.dx() / s.fd.free_flow_speed());
    let commodity = Commodity { influx: s.influx.clone(), distance: s.distance.clone(), ic: s.ic.clone() };
    let speed = |_: usize, js: &JointState| s.fd.speed_at(js.lambda[0] / js.lane_miles);
    let mut out = march(s.lane_miles, std::slice::from_ref(&commodity), &speed, &s.grid, dt)?;
    Ok(out.remove(0))
}

/// Several commodities on a shared time grid, each with its own trips and
/// cumulative distance. `speed(m, state)` returns commodity `m`'s speed.
/// The grid must carry an explicit time step.
pub fn solve_multi_commodity(
    lane_miles: f64,
    commodities: &[Commodity],
    speed: &dyn Fn(usize, &JointState) -> f64,
    grid: &GridSpec,
) -> Result<Vec<Trajectory>> {
    check_lane_miles(lane_miles)?;
    if commodities.is_empty() {
        return Err(invalid("commodities", "at least one commodity is required"));
    }
    let dt = grid.dt().ok_or_else(|| invalid("dt", "the multi-commodity solver needs a time step"))?;
    march(lane_miles, commodities, speed, grid, dt)
}

/// Integral scheme with speed from an extended relation `V(rho, lambda, f, g)`;
/// `g` lags one step behind.
pub fn solve_mobility_service(s: &MobilityScenario) -> Result<Trajectory> {
    check_lane_miles(s.lane_miles)?;
    let dt = match s.grid.dt() {
        Some(dt) => dt,
        None => {
            let u = s.relation.speed_at(0.0, 0.0, 0.0, 0.0);
            if u <= 0.0 {
                return Err(invalid("dt", "needed when the relation has no positive free-flow speed"));
            }
            s.grid.dx() / u
        }
    };
    let speed = |_: usize, js: &JointState| {
        let lambda = js.lambda[0];
        let rho = match &s.density {
            VehicleDensity::Exogenous(p) => p.eval(js.t).max(0.0),
            VehicleDensity::FromTrips => lambda / js.lane_miles,
        };
        s.relation.speed_at(rho, lambda, js.influx[0], js.outflux[0])
    };
    let mut out = march(s.lane_miles, std::slice::from_ref(&s.commodity), &speed, &s.grid, dt)?;
    Ok(out.remove(0))
}

//! Forward solvers for the K-model and the quantities derived from a solved run.

mod characteristic;
mod derived;
mod integral;

pub use characteristic::solve_characteristic;
pub use derived::{outflux_series, reconstruct_k, remaining_distance_stats, OutfluxEstimates, RemainingDistanceStats};
pub use integral::{
    solve_integral, solve_mobility_service, solve_multi_commodity, Commodity, JointState, MobilityScenario,
    VehicleDensity,
};

use crate::demand::{DistanceDistribution, InfluxProfile, InitialCondition};
use crate::diagrams::FundamentalDiagram;
use crate::error::{invalid, Error, Result};

/// Speed below which the network counts as gridlocked.
pub const DEFAULT_V_MIN: f64 = 1e-9;
const DEFAULT_MAX_STEPS: usize = 5_000_000;
const HORIZON_TOL: f64 = 1e-12;

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Stop at time `T` hours.
    MaxTime(f64),
    /// Stop once the cumulative travel distance reaches `Z` miles.
    MaxDistance(f64),
}

impl Horizon {
    pub(crate) fn reached(&self, t: f64, z: f64) -> bool {
        match *self {
            Horizon::MaxTime(end) => t >= end * (1.0 - HORIZON_TOL),
            Horizon::MaxDistance(end) => z >= end * (1.0 - HORIZON_TOL),
        }
    }

    /// True when a step of length `dt` from `t` would pass a time horizon.
    pub(crate) fn overshoots(&self, t: f64, dt: f64) -> bool {
        match *self {
            Horizon::MaxTime(end) => t + dt > end * (1.0 + HORIZON_TOL),
            Horizon::MaxDistance(_) => false,
        }
    }
}

/// Remaining-distance grid, stopping rule and step controls.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dx: f64,
    x_max: f64,
    horizon: Horizon,
    dt: Option<f64>,
    v_min: f64,
    allow_truncation: bool,
    snapshot_every: Option<usize>,
    max_steps: usize,
}

impl GridSpec {
    /// `x_max` must be a positive integer multiple of `dx`.
    pub fn new(dx: f64, x_max: f64, horizon: Horizon) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(invalid("dx", format!("must be positive, got {dx}")));
        }
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(invalid("X", format!("must be positive, got {x_max}")));
        }
        let ratio = x_max / dx;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(invalid("X", format!("{x_max} is not an integer multiple of dx = {dx}")));
        }
        match horizon {
            Horizon::MaxTime(v) | Horizon::MaxDistance(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(invalid("horizon", format!("must be positive, got {v}")));
            }
            _ => {}
        }
        Ok(Self {
            dx,
            x_max,
            horizon,
            dt: None,
            v_min: DEFAULT_V_MIN,
            allow_truncation: false,
            snapshot_every: None,
            max_steps: DEFAULT_MAX_STEPS,
        })
    }

    /// Fixed time step of the integral scheme.
    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        self.dt = Some(dt);
        Ok(self)
    }

    pub fn with_v_min(mut self, v_min: f64) -> Result<Self> {
        if !(v_min > 0.0 && v_min.is_finite()) {
            return Err(invalid("v_min", format!("must be positive, got {v_min}")));
        }
        self.v_min = v_min;
        Ok(self)
    }

    /// Accept runs whose mass beyond `X` exceeds the default limit.
    pub fn allowing_truncation(mut self, allow: bool) -> Self {
        self.allow_truncation = allow;
        self
    }

    /// Store a K profile every `n` steps (the last step is always stored).
    pub fn with_snapshot_every(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("snapshot stride", "must be at least 1"));
        }
        self.snapshot_every = Some(n);
        Ok(self)
    }

    pub fn with_max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn horizon(&self) -> Horizon {
        self.horizon
    }
    pub fn dt(&self) -> Option<f64> {
        self.dt
    }
    pub fn v_min(&self) -> f64 {
        self.v_min
    }
    pub fn truncation_allowed(&self) -> bool {
        self.allow_truncation
    }
    pub fn snapshot_every(&self) -> Option<usize> {
        self.snapshot_every
    }
    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    /// Number of grid intervals `I = X / dx`.
    pub fn intervals(&self) -> usize {
        (self.x_max / self.dx).round() as usize
    }

    pub fn x_grid(&self) -> Vec<f64> {
        (0..=self.intervals()).map(|i| i as f64 * self.dx).collect()
    }

    /// Survival restricted to the grid: zero beyond `X`, so longer trips are clamped to `X`.
    pub(crate) fn clip(&self, x: f64) -> bool {
        x <= self.x_max + 1e-9 * self.dx
    }
}

/// Everything needed for one generalized-model run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub lane_miles: f64,
    pub fd: FundamentalDiagram,
    pub influx: InfluxProfile,
    pub distance: DistanceDistribution,
    pub ic: InitialCondition,
    pub grid: GridSpec,
}

impl Scenario {
    pub fn new(
        lane_miles: f64,
        fd: FundamentalDiagram,
        influx: InfluxProfile,
        distance: DistanceDistribution,
        ic: InitialCondition,
        grid: GridSpec,
    ) -> Result<Self> {
        let s = Self { lane_miles, fd, influx, distance, ic, grid };
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        check_lane_miles(self.lane_miles)
    }
}

pub(crate) fn check_lane_miles(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(invalid("L", format!("lane-miles must be positive, got {l}")))
    }
}

/// One stored snapshot of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct BathtubState {
    pub t: f64,
    pub z: f64,
    pub lambda: f64,
    pub v: f64,
    pub dx: f64,
    /// `k[i]` approximates `K(t, i dx)`.
    pub k: Vec<f64>,
}

/// Aligned per-step time series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub v: Vec<f64>,
    /// In-flux rate used at the step.
    pub f: Vec<f64>,
    /// Cumulative in-flow `F`.
    pub cum_in: Vec<f64>,
    /// Out-flux estimated from consecutive `G` values.
    pub g: Vec<f64>,
    /// Cumulative out-flow `G`.
    pub cum_out: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64, z: f64, lambda: f64, v: f64, f: f64, cum_in: f64, cum_out: f64) {
        self.t.push(t);
        self.z.push(z);
        self.lambda.push(lambda);
        self.v.push(v);
        self.f.push(f);
        self.cum_in.push(cum_in);
        self.cum_out.push(cum_out);
    }

    /// Fills `g` by forward differences of `G`; the last step repeats the previous rate.
    pub(crate) fn finish(&mut self) {
        let n = self.t.len();
        self.g = (0..n)
            .map(|j| {
                let (a, b) = if j + 1 < n { (j, j + 1) } else if n > 1 { (n - 2, n - 1) } else { return 0.0 };
                (self.cum_out[b] - self.cum_out[a]) / (self.t[b] - self.t[a])
            })
            .collect();
    }
}

/// Trips entering during one step, as needed to rebuild `K` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    /// Time at which the distance distribution is evaluated.
    pub t: f64,
    /// Cumulative distance the entry's remaining distances are measured from.
    pub z: f64,
    pub mass: f64,
    /// First time at which the entry is part of the state.
    pub settled_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Integral,
    Characteristic,
    VickreyEuler,
    DeterministicZGrid,
    ConstantDistanceZGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    HorizonReached,
    Gridlock,
}

/// Demand data kept with a trajectory for reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionModel {
    pub ic: InitialCondition,
    pub distance: DistanceDistribution,
}

/// A solved run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub series: Series,
    /// Stored K profiles; empty for models without a distance grid.
    pub states: Vec<BathtubState>,
    pub entries: Vec<Entry>,
    pub lane_miles: f64,
    /// Grid spacing and extent of the remaining-distance axis, if any.
    pub x_grid: Option<(f64, f64)>,
    pub truncated_mass: f64,
    pub termination: Termination,
    pub model: Option<ReconstructionModel>,
}

impl Trajectory {
    pub fn lambda0(&self) -> f64 {
        self.series.lambda[0]
    }

    pub fn final_time(&self) -> f64 {
        *self.series.t.last().expect("non-empty series")
    }

    pub fn final_distance(&self) -> f64 {
        *self.series.z.last().expect("non-empty series")
    }

    pub fn last_state(&self) -> Option<&BathtubState> {
        self.states.last()
    }

    /// `z(t)` by linear interpolation of the series.
    pub fn distance_at(&self, t: f64) -> Result<f64> {
        let s = &self.series;
        let (lo, hi) = (s.t[0], self.final_time());
        if !(t >= lo - 1e-12 * hi.abs().max(1.0) && t <= hi * (1.0 + 1e-12) + 1e-15) {
            return Err(Error::Range { what: "t", value: t, lo, hi });
        }
        Ok(interpolate(&s.t, &s.z, t))
    }

    /// `tau(z)`, the first time the cumulative distance reaches `z`, if it does.
    pub fn time_at_distance(&self, z: f64) -> Option<f64> {
        let s = &self.series;
        if z > self.final_distance() {
            return None;
        }
        if z <= s.z[0] {
            return Some(s.t[0]);
        }
        let k = s.z.partition_point(|&a| a < z);
        let (z0, z1, t0, t1) = (s.z[k - 1], s.z[k], s.t[k - 1], s.t[k]);
        Some(if z1 == z0 { t1 } else { t0 + (z - z0) * (t1 - t0) / (z1 - z0) })
    }

    /// Linear interpolation of any series column at time `t`.
    pub fn sample(&self, column: &[f64], t: f64) -> f64 {
        interpolate(&self.series.t, column, t)
    }

    /// Time and value of the largest trip count.
    pub fn peak_lambda(&self) -> (f64, f64) {
        let s = &self.series;
        let mut best = 0;
        for j in 1..s.len() {
            if s.lambda[j] > s.lambda[best] {
                best = j;
            }
        }
        (s.t[best], s.lambda[best])
    }
}

/// Linear interpolation on sorted abscissae, clamped at the ends.
pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&a| a <= x);
    if xs[k - 1] == x {
        return ys[k - 1];
    }
    ys[k - 1] + (x - xs[k - 1]) * (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1])
}

/// Fails when the mass clamped at `X` is more than a millionth of all trips.
pub(crate) fn check_truncation(grid: &GridSpec, truncated: f64, total_trips: f64) -> Result<()> {
    let limit = 1e-6 * total_trips;
    if !grid.truncation_allowed() && truncated > limit {
        return Err(Error::Truncation { mass: truncated, limit });
    }
    Ok(())
}

/// Whether step `j` gets a stored profile.
pub(crate) fn is_snapshot(j: usize, stride: usize) -> bool {
    j % stride == 0
}

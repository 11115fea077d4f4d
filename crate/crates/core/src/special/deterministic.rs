use crate::demand::{DistanceDistribution, InfluxProfile, InitialCondition};
use crate::diagrams::FundamentalDiagram;
use crate::error::{invalid, Error, Result};
use crate::pwl::PiecewiseLinear;
use crate::solver::{
    check_lane_miles, BathtubState, Entry, Horizon, ReconstructionModel, Scheme, Series, Termination, Trajectory,
    DEFAULT_V_MIN,
};

/// Tolerance on `dB/dz + 1` below which an interval counts as the equal case.
const REGIME_TOL: f64 = 1e-9;

/// Every trip entering at `t` travels exactly `mean(t)` miles.
#[derive(Debug, Clone)]
pub struct DeterministicConfig {
    pub lane_miles: f64,
    pub fd: FundamentalDiagram,
    /// Trip distance as a function of entry time.
    pub mean: PiecewiseLinear,
    pub influx: InfluxProfile,
    pub ic: InitialCondition,
    /// Step of the cumulative-distance grid.
    pub dz: f64,
    pub horizon: Horizon,
    pub v_min: f64,
    pub max_steps: usize,
}

impl DeterministicConfig {
    pub fn new(
        lane_miles: f64,
        fd: FundamentalDiagram,
        mean: PiecewiseLinear,
        influx: InfluxProfile,
        ic: InitialCondition,
        dz: f64,
        horizon: Horizon,
    ) -> Result<Self> {
        let c = Self { lane_miles, fd, mean, influx, ic, dz, horizon, v_min: DEFAULT_V_MIN, max_steps: 5_000_000 };
        c.validate()?;
        Ok(c)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        check_lane_miles(self.lane_miles)?;
        if !(self.dz > 0.0 && self.dz.is_finite()) {
            return Err(invalid("dz", format!("must be positive, got {}", self.dz)));
        }
        if !(self.mean.min_value() > 0.0) {
            return Err(invalid("Btilde", "trip distances must be positive"));
        }
        Ok(())
    }

    /// Grid extent covering every trip distance and the initial profile.
    pub(crate) fn extent(&self) -> f64 {
        let ic_end = match &self.ic {
            InitialCondition::Tabulated { xs, .. } => xs[xs.len() - 1],
            _ => 0.0,
        };
        let top = self.mean.max_value().max(ic_end);
        (top / self.dz).ceil().max(1.0) * self.dz
    }
}

/// Sign of `dB/dz + 1`, which decides the exit order of entering trips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `dB/dz = -1`: trips entering together leave together.
    EqualMinusOne,
    /// `dB/dz < -1`: later trips leave first.
    LessThanMinusOne,
    /// `dB/dz > -1`: first in, first out.
    GreaterThanMinusOne,
}

impl Regime {
    fn of(slope: f64) -> Self {
        let s = slope + 1.0;
        if s.abs() < REGIME_TOL {
            Regime::EqualMinusOne
        } else if s < 0.0 {
            Regime::LessThanMinusOne
        } else {
            Regime::GreaterThanMinusOne
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSegment {
    pub z_start: f64,
    pub z_end: f64,
    pub regime: Regime,
}

fn push_regime(out: &mut Vec<RegimeSegment>, z0: f64, z1: f64, regime: Regime) {
    match out.last_mut() {
        Some(last) if last.regime == regime => last.z_end = z1,
        _ => out.push(RegimeSegment { z_start: z0, z_end: z1, regime }),
    }
}

/// Regimes along a solved run, from `dB/dz = (dB/dt) / v` on each step.
pub fn classify_regime(mean: &PiecewiseLinear, traj: &Trajectory) -> Vec<RegimeSegment> {
    let s = &traj.series;
    let mut out = Vec::new();
    for j in 0..s.len().saturating_sub(1) {
        let dz = s.z[j + 1] - s.z[j];
        if dz <= 0.0 {
            continue;
        }
        let slope = (mean.eval(s.t[j + 1]) - mean.eval(s.t[j])) / dz;
        push_regime(&mut out, s.z[j], s.z[j + 1], Regime::of(slope));
    }
    out
}

/// Entering trips on the z-grid: node `m` sits at `z = m dz`.
struct ExitLedger {
    /// Cumulative in-flow at each node.
    cum_in: Vec<f64>,
    /// Exit level `theta = B(tau) + z` at each node.
    theta: Vec<f64>,
    /// Maximal node runs `[start, end]` sharing a regime.
    runs: Vec<(usize, usize, Regime)>,
}

impl ExitLedger {
    fn add_node(&mut self, cum_in: f64, theta: f64, dz: f64) {
        self.cum_in.push(cum_in);
        self.theta.push(theta);
        let m = self.theta.len() - 1;
        if m == 0 {
            return;
        }
        let regime = Regime::of((theta - self.theta[m - 1]) / dz - 1.0);
        match self.runs.last_mut() {
            Some(run) if run.2 == regime => run.1 = m,
            _ => self.runs.push((m - 1, m, regime)),
        }
    }

    /// Entering trips with `theta <= w` among nodes up to `last`.
    fn exited(&self, w: f64, last: usize) -> Result<f64> {
        let mut total = 0.0;
        for &(a, b, regime) in &self.runs {
            if a >= last {
                break;
            }
            let b = b.min(last);
            let (th, cf) = (&self.theta[a..=b], &self.cum_in[a..=b]);
            let mass = cf[cf.len() - 1] - cf[0];
            total += match regime {
                Regime::EqualMinusOne => {
                    if w >= th[0] {
                        mass
                    } else {
                        0.0
                    }
                }
                Regime::GreaterThanMinusOne => {
                    if th.windows(2).any(|p| p[1] <= p[0]) {
                        return Err(Error::Consistency("exit level not increasing in a FIFO segment".into()));
                    }
                    inverse_share(th, cf, w, true)
                }
                Regime::LessThanMinusOne => {
                    if th.windows(2).any(|p| p[1] >= p[0]) {
                        return Err(Error::Consistency("exit level not decreasing in a LIFO segment".into()));
                    }
                    inverse_share(th, cf, w, false)
                }
            };
        }
        Ok(total)
    }
}

/// Mass of a monotone segment whose exit level is at most `w`, locating
/// `theta^{-1}(w)` by bisection on the node values.
fn inverse_share(theta: &[f64], cum_in: &[f64], w: f64, increasing: bool) -> f64 {
    let n = theta.len();
    let total = cum_in[n - 1] - cum_in[0];
    if increasing {
        if w < theta[0] {
            return 0.0;
        }
        if w >= theta[n - 1] {
            return total;
        }
        let k = theta.partition_point(|&th| th <= w);
        let s = (w - theta[k - 1]) / (theta[k] - theta[k - 1]);
        cum_in[k - 1] + s * (cum_in[k] - cum_in[k - 1]) - cum_in[0]
    } else {
        if w < theta[n - 1] {
            return 0.0;
        }
        if w >= theta[0] {
            return total;
        }
        let k = theta.partition_point(|&th| th > w);
        let s = (theta[k - 1] - w) / (theta[k - 1] - theta[k]);
        cum_in[n - 1] - (cum_in[k - 1] + s * (cum_in[k] - cum_in[k - 1]))
    }
}

/// Deterministic trip distances solved on the cumulative-distance grid.
///
/// With `theta(y) = B(tau(y)) + y` the exit level of trips entering at
/// distance `y`, `lambda(z) = K(0, z) + F(z) - (mass entered with theta <= z)`;
/// the exited mass is found per regime segment by inverting `theta`.
pub fn solve_deterministic(c: &DeterministicConfig) -> Result<Trajectory> {
    c.validate()?;
    let dz = c.dz;
    let x_max = c.extent();
    let n_x = (x_max / dz).round() as usize;
    let lambda0 = c.ic.lambda0();
    let mut ledger = ExitLedger { cum_in: Vec::new(), theta: Vec::new(), runs: Vec::new() };
    let mut series = Series::default();
    let mut states = Vec::new();
    let mut entries = Vec::new();
    let (mut tau, mut cum_in, mut lambda) = (0.0, 0.0, lambda0);
    ledger.add_node(0.0, c.mean.eval(0.0), dz);
    let mut j = 0usize;

    let termination = loop {
        let z = j as f64 * dz;
        let v = c.fd.speed_at(lambda / c.lane_miles);
        let f = c.influx.rate_at(tau);
        series.push(tau, z, lambda, v, f, cum_in, lambda0 + cum_in - lambda);
        let mut k = Vec::with_capacity(n_x + 1);
        k.push(lambda);
        for i in 1..=n_x {
            let w = z + i as f64 * dz;
            // Trips still carrying at least `x = w - z` miles.
            k.push(c.ic.profile(w) + cum_in - ledger.exited(w - 1e-12 * dz, j)?.min(cum_in));
        }
        states.push(BathtubState { t: tau, z, lambda, v, dx: dz, k });
        if c.horizon.reached(tau, z) {
            break Termination::HorizonReached;
        }
        if v < c.v_min {
            break Termination::Gridlock;
        }
        let dtau = dz / v;
        if c.horizon.overshoots(tau, dtau) {
            break Termination::HorizonReached;
        }
        if j >= c.max_steps {
            return Err(Error::StepLimit(c.max_steps));
        }
        let mass = f * dtau;
        let tau_next = tau + dtau;
        entries.push(Entry { t: tau, z, mass, settled_at: tau_next });
        tau = tau_next;
        cum_in += mass;
        j += 1;
        let z_next = j as f64 * dz;
        ledger.add_node(cum_in, c.mean.eval(tau) + z_next, dz);
        lambda = c.ic.profile(z_next) + cum_in - ledger.exited(z_next, j)?;
    };
    series.finish();
    Ok(Trajectory {
        scheme: Scheme::DeterministicZGrid,
        series,
        states,
        entries,
        lane_miles: c.lane_miles,
        x_grid: Some((dz, x_max)),
        truncated_mass: 0.0,
        termination,
        model: Some(ReconstructionModel {
            ic: c.ic.clone(),
            distance: DistanceDistribution::deterministic(c.mean.clone())?,
        }),
    })
}

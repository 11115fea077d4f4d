use crate::demand::{DistanceDistribution, InitialCondition};
use crate::diagrams::FundamentalDiagram;
use crate::error::{check_non_negative, invalid, Error, Result};
use crate::solver::BathtubState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

/// A constant-demand equilibrium on the uncongested branch.
#[derive(Debug, Clone)]
pub struct StationaryState {
    pub lambda: f64,
    pub v: f64,
    pub f: f64,
    /// Mean remaining distance of active trips.
    pub mean_remaining: f64,
    /// Mean distance of entering trips.
    pub entering_mean: f64,
    pub stability: Stability,
    distance: DistanceDistribution,
}

impl StationaryState {
    /// Remaining-distance survival `Phi(x) = int_x^inf Phi~ / B~`.
    pub fn survival(&self, x: f64) -> f64 {
        let slice = self.distance.slice(0.0);
        slice.tail_integral(x) / self.entering_mean
    }

    /// Density of remaining distances at zero, `phi(0) = 1 / B~`.
    pub fn density_at_zero(&self) -> f64 {
        1.0 / self.entering_mean
    }

    /// The state as an initial condition: exact for exponential distances,
    /// otherwise tabulated on `[0, x_max]` with spacing `dx`.
    pub fn initial_condition(&self, dx: f64, x_max: f64) -> Result<InitialCondition> {
        if self.lambda == 0.0 {
            return Ok(InitialCondition::Empty);
        }
        if let DistanceDistribution::Exponential { .. } = self.distance {
            return InitialCondition::exponential(self.lambda, self.entering_mean);
        }
        let n = (x_max / dx).round() as usize;
        let xs: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
        let counts = xs.iter().map(|&x| self.lambda * self.survival(x)).collect();
        InitialCondition::tabulated(xs, counts)
    }
}

#[derive(Debug, Clone)]
pub enum StationaryOutcome {
    Feasible(StationaryState),
    /// `B~ f` exceeds the network's trip-miles capacity `L C`.
    Infeasible { demand: f64, supply: f64 },
}

/// Equilibrium for constant in-flux `f` and a time-independent distance
/// distribution: `B~ f = L Q(lambda / L)`, taking the smallest root.
///
/// The remaining distances then have survival `int_x^inf Phi~ / B~`, which for
/// exponential distances is the entering distribution itself.
pub fn stationary_state(
    fd: &FundamentalDiagram,
    lane_miles: f64,
    f: f64,
    dist: &DistanceDistribution,
) -> Result<StationaryOutcome> {
    check_non_negative("in-flux", f)?;
    crate::solver::check_lane_miles(lane_miles)?;
    if !dist.is_time_independent() {
        return Err(invalid("distance distribution", "stationary states need a time-independent distribution"));
    }
    let slice = dist.slice(0.0);
    let entering_mean = slice.mean();
    let mean_remaining = first_moment(dist) / entering_mean;
    let cap = fd.capacity();
    let target = entering_mean * f / lane_miles;
    let state = |rho: f64, stability: Stability| StationaryState {
        lambda: lane_miles * rho,
        v: fd.speed_at(rho),
        f,
        mean_remaining,
        entering_mean,
        stability,
        distance: dist.clone(),
    };
    if target > cap.flow * (1.0 + 1e-9) {
        return Ok(StationaryOutcome::Infeasible { demand: entering_mean * f, supply: lane_miles * cap.flow });
    }
    if (target - cap.flow).abs() <= 1e-9 * cap.flow {
        return Ok(StationaryOutcome::Feasible(state(cap.density, Stability::Marginal)));
    }
    if f == 0.0 {
        return Ok(StationaryOutcome::Feasible(state(0.0, stability_at(fd, 0.0))));
    }
    let rho = smallest_root(fd, target, cap.density)?;
    Ok(StationaryOutcome::Feasible(state(rho, stability_at(fd, rho))))
}

/// `int_0^inf x Phi~(x) dx`, half the second moment of entering distances.
fn first_moment(dist: &DistanceDistribution) -> f64 {
    let slice = dist.slice(0.0);
    let b = slice.mean();
    match dist {
        DistanceDistribution::Exponential { .. } => b * b,
        DistanceDistribution::Uniform { .. } => 2.0 * b * b / 3.0,
        DistanceDistribution::Deterministic { .. } => b * b / 2.0,
        // int_0^inf x Phi~ dx = int_0^inf tail(x) dx, integrated on a fine grid.
        DistanceDistribution::Tabulated(_) => {
            let mut x_end = b;
            while slice.tail_integral(x_end) > 1e-12 * b {
                x_end *= 2.0;
            }
            let n = 1 << 16;
            let h = x_end / n as f64;
            (0..n)
                .map(|i| 0.5 * h * (slice.tail_integral(i as f64 * h) + slice.tail_integral((i + 1) as f64 * h)))
                .sum()
        }
    }
}

/// Smallest density in `[0, rho_cap]` with `Q(rho) = q`, by scan then bisection.
fn smallest_root(fd: &FundamentalDiagram, q: f64, rho_cap: f64) -> Result<f64> {
    const SCAN: usize = 4096;
    let h = rho_cap / SCAN as f64;
    let k = (1..=SCAN)
        .find(|&k| fd.flow_at(k as f64 * h) >= q)
        .ok_or_else(|| Error::Consistency("no density reaches the required flow".into()))?;
    let (mut lo, mut hi) = ((k - 1) as f64 * h, k as f64 * h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fd.flow_at(mid) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn stability_at(fd: &FundamentalDiagram, rho: f64) -> Stability {
    match fd.flow_slope_sign(rho) {
        1 => Stability::Stable,
        0 => Stability::Marginal,
        _ => Stability::Unstable,
    }
}

/// Stability of a stationary state from the sign of `dQ/drho` at `lambda / L`.
pub fn stability_classify(fd: &FundamentalDiagram, lane_miles: f64, lambda: f64) -> Stability {
    stability_at(fd, lambda / lane_miles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridlockPrediction {
    /// `f B~ > L C`: demand exceeds the trip-miles capacity.
    WillGridlock,
    /// The sufficient condition does not hold; gridlock is still possible.
    NotImplied,
}

pub fn gridlock_predict(f: f64, entering_mean: f64, lane_miles: f64, fd: &FundamentalDiagram) -> GridlockPrediction {
    if f * entering_mean > lane_miles * fd.capacity().flow {
        GridlockPrediction::WillGridlock
    } else {
        GridlockPrediction::NotImplied
    }
}

/// Active trips with remaining distance below `x0`: `lambda - K(t, x0)`.
pub fn diversion_outflux(state: &BathtubState, x0: f64) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(Error::Domain { what: "diversion distance", value: x0 });
    }
    let n = state.k.len() - 1;
    let x_max = n as f64 * state.dx;
    if x0 >= x_max {
        return Ok(state.lambda);
    }
    let pos = x0 / state.dx;
    let i = (pos.floor() as usize).min(n - 1);
    let w = pos - i as f64;
    let k = state.k[i] + w * (state.k[i + 1] - state.k[i]);
    Ok(state.lambda - k)
}

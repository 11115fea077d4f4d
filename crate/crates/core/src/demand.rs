//! Demand side: trip in-flux, entering-trip distance distributions and the
//! initial distribution of remaining distances.

use crate::error::{check_non_negative, invalid, Error, Result};
use crate::pwl::{Outside, PiecewiseLinear};

/// Relative tolerance for the atom of a deterministic distance distribution.
const ATOM_TOL: f64 = 1e-12;

/// Shape of the in-flux `f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InfluxKind {
    /// Linear between nodes, zero outside the node range.
    PiecewiseLinear(PiecewiseLinear),
    /// `max{0, min{ramp t, plateau, ramp (end - t)}}`.
    TrapezoidalPulse { ramp: f64, plateau: f64, end: f64 },
    Constant(f64),
    Zero,
}

/// Rate of trips entering the network, in trips per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluxProfile {
    kind: InfluxKind,
    curve: PiecewiseLinear,
}

impl InfluxProfile {
    pub fn zero() -> Self {
        Self {
            kind: InfluxKind::Zero,
            curve: PiecewiseLinear::constant(0.0),
        }
    }

    pub fn constant(rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid("influx rate", format!("must be non-negative, got {rate}")));
        }
        Ok(Self {
            kind: InfluxKind::Constant(rate),
            curve: PiecewiseLinear::constant(rate),
        })
    }

    pub fn trapezoidal_pulse(ramp: f64, plateau: f64, end: f64) -> Result<Self> {
        for (name, v) in [("ramp", ramp), ("plateau", plateau), ("end", end)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        let rise = plateau / ramp;
        let nodes = if 2.0 * rise < end {
            vec![(0.0, 0.0), (rise, plateau), (end - rise, plateau), (end, 0.0)]
        } else {
            vec![(0.0, 0.0), (0.5 * end, 0.5 * ramp * end), (end, 0.0)]
        };
        Ok(Self {
            kind: InfluxKind::TrapezoidalPulse { ramp, plateau, end },
            curve: PiecewiseLinear::new(&nodes, Outside::Zero)?,
        })
    }

    pub fn piecewise_linear(nodes: &[(f64, f64)]) -> Result<Self> {
        if nodes.iter().any(|n| n.1 < 0.0) {
            return Err(invalid("influx nodes", "rates must be non-negative"));
        }
        let curve = PiecewiseLinear::new(nodes, Outside::Zero)?;
        Ok(Self {
            kind: InfluxKind::PiecewiseLinear(curve.clone()),
            curve,
        })
    }

    pub fn kind(&self) -> &InfluxKind {
        &self.kind
    }

    /// `f(t)`; errors for negative time.
    pub fn rate(&self, t: f64) -> Result<f64> {
        check_non_negative("time", t)?;
        Ok(self.rate_at(t))
    }

    pub(crate) fn rate_at(&self, t: f64) -> f64 {
        match &self.kind {
            InfluxKind::TrapezoidalPulse { ramp, plateau, end } => {
                (ramp * t).min(*plateau).min(ramp * (end - t)).max(0.0)
            }
            InfluxKind::Constant(r) => *r,
            InfluxKind::Zero => 0.0,
            InfluxKind::PiecewiseLinear(p) => p.eval(t),
        }
    }

    /// `F(t)`, the exact integral of `f` over `[0, t]`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        check_non_negative("time", t)?;
        Ok(self.curve.integral(0.0, t))
    }

    /// Largest rate attained.
    pub fn peak(&self) -> f64 {
        self.curve.max_value()
    }
}

/// Entering-trip survival function sampled on an x-grid at several times.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    xs: Vec<f64>,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl SurvivalTable {
    /// Rows whose first value is within 1e-6 of one are rescaled to start at
    /// exactly one; larger deviations are rejected.
    pub fn new(xs: Vec<f64>, times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if xs.len() < 2 || xs[0] != 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("survival x-grid", "must start at 0 and increase strictly"));
        }
        if times.is_empty() || times.len() != rows.len() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("survival times", "need one strictly increasing time per row"));
        }
        let mut out = Vec::with_capacity(rows.len());
        for (row, t) in rows.into_iter().zip(&times) {
            if row.len() != xs.len() {
                return Err(Error::Data(format!("survival row at t={t} has {} values, expected {}", row.len(), xs.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("survival row at t={t} contains non-finite values")));
            }
            if (row[0] - 1.0).abs() >= 1e-6 {
                return Err(Error::Data(format!("survival row at t={t} starts at {} instead of 1", row[0])));
            }
            let scale = row[0];
            let row: Vec<f64> = row.iter().map(|v| v / scale).collect();
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) || row.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Data(format!("survival row at t={t} must be non-increasing within [0, 1]")));
            }
            out.push(row);
        }
        Ok(Self { xs, times, rows: out })
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let k = self.times.partition_point(|&a| a <= t);
        let w = (t - self.times[k - 1]) / (self.times[k] - self.times[k - 1]);
        (k - 1, k, w)
    }

    fn row_value(&self, row: &[f64], x: f64) -> f64 {
        let n = self.xs.len();
        if x >= self.xs[n - 1] {
            return if x == self.xs[n - 1] { row[n - 1] } else { 0.0 };
        }
        let k = self.xs.partition_point(|&a| a <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        row[k - 1] + (x - x0) * (row[k] - row[k - 1]) / (x1 - x0)
    }

    fn row_tail(&self, row: &[f64], x: f64) -> f64 {
        let n = self.xs.len();
        let mut total = 0.0;
        for k in 1..n {
            let lo = x.max(self.xs[k - 1]);
            let hi = self.xs[k];
            if hi > lo {
                total += 0.5 * (hi - lo) * (self.row_value(row, lo) + row[k]);
            }
        }
        total
    }

    fn is_time_independent(&self) -> bool {
        self.rows.iter().all(|r| r == &self.rows[0])
    }
}

/// Distribution of entering trips' total distances, `Phi~(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceDistribution {
    /// `exp(-x / B(t))`.
    Exponential { mean: PiecewiseLinear },
    /// Every trip entering at `t` has distance `B(t)`.
    Deterministic { mean: PiecewiseLinear },
    /// Uniform on `[0, 2 B(t)]`.
    Uniform { mean: PiecewiseLinear },
    Tabulated(SurvivalTable),
}

/// The distance distribution frozen at one entry time.
#[derive(Debug, Clone, Copy)]
pub enum DistanceSlice<'a> {
    Exponential(f64),
    Deterministic(f64),
    Uniform(f64),
    Tabulated {
        table: &'a SurvivalTable,
        lo: usize,
        hi: usize,
        weight: f64,
    },
}

fn check_mean(mean: &PiecewiseLinear) -> Result<()> {
    if mean.min_value() > 0.0 {
        Ok(())
    } else {
        Err(invalid("mean distance", "must be positive at all times"))
    }
}

impl DistanceDistribution {
    pub fn exponential(mean: f64) -> Result<Self> {
        Self::exponential_varying(PiecewiseLinear::constant(mean))
    }

    pub fn exponential_varying(mean: PiecewiseLinear) -> Result<Self> {
        check_mean(&mean)?;
        Ok(Self::Exponential { mean })
    }

    pub fn deterministic(mean: PiecewiseLinear) -> Result<Self> {
        check_mean(&mean)?;
        Ok(Self::Deterministic { mean })
    }

    pub fn uniform(mean: PiecewiseLinear) -> Result<Self> {
        check_mean(&mean)?;
        Ok(Self::Uniform { mean })
    }

    pub fn tabulated(table: SurvivalTable) -> Self {
        Self::Tabulated(table)
    }

    pub fn slice(&self, t: f64) -> DistanceSlice<'_> {
        match self {
            Self::Exponential { mean } => DistanceSlice::Exponential(mean.eval(t)),
            Self::Deterministic { mean } => DistanceSlice::Deterministic(mean.eval(t)),
            Self::Uniform { mean } => DistanceSlice::Uniform(mean.eval(t)),
            Self::Tabulated(table) => {
                let (lo, hi, weight) = table.bracket(t);
                DistanceSlice::Tabulated { table, lo, hi, weight }
            }
        }
    }

    /// `Phi~(t, x)`: share of trips entering at `t` with distance at least `x`.
    pub fn survival(&self, t: f64, x: f64) -> Result<f64> {
        check_non_negative("time", t)?;
        check_non_negative("distance", x)?;
        Ok(self.slice(t).survival(x))
    }

    /// `B~(t)`, the mean distance of trips entering at `t`.
    pub fn mean_distance(&self, t: f64) -> Result<f64> {
        check_non_negative("time", t)?;
        Ok(self.slice(t).mean())
    }

    /// Mean-distance profile for the parametric families.
    pub fn mean_profile(&self) -> Option<&PiecewiseLinear> {
        match self {
            Self::Exponential { mean } | Self::Deterministic { mean } | Self::Uniform { mean } => Some(mean),
            Self::Tabulated(_) => None,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            Self::Exponential { mean } | Self::Deterministic { mean } | Self::Uniform { mean } => mean.is_constant(),
            Self::Tabulated(t) => t.is_time_independent(),
        }
    }
}

impl DistanceSlice<'_> {
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential(b) => (-x / b).exp(),
            Self::Deterministic(b) => {
                if x <= b * (1.0 + ATOM_TOL) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform(b) => (1.0 - x / (2.0 * b)).max(0.0),
            Self::Tabulated { table, lo, hi, weight } => {
                let a = table.row_value(&table.rows[lo], x);
                if weight == 0.0 {
                    a
                } else {
                    (1.0 - weight) * a + weight * table.row_value(&table.rows[hi], x)
                }
            }
        }
    }

    /// Share of trips with distance strictly greater than `x`.
    pub fn exceedance(&self, x: f64) -> f64 {
        match *self {
            Self::Deterministic(b) => {
                if b > x * (1.0 + ATOM_TOL) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.survival(x),
        }
    }

    /// `int_x^inf Phi~(y) dy`.
    pub fn tail_integral(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            Self::Exponential(b) => b * (-x / b).exp(),
            Self::Deterministic(b) => (b - x).max(0.0),
            Self::Uniform(b) => {
                let r = (2.0 * b - x).max(0.0);
                r * r / (4.0 * b)
            }
            Self::Tabulated { table, lo, hi, weight } => {
                let a = table.row_tail(&table.rows[lo], x);
                if weight == 0.0 {
                    a
                } else {
                    (1.0 - weight) * a + weight * table.row_tail(&table.rows[hi], x)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.tail_integral(0.0)
    }
}

/// `K(0, x)`: initial trips with remaining distance at least `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Empty,
    /// `lambda0 * exp(-x / mean)`.
    Exponential { lambda0: f64, mean: f64 },
    /// Linear interpolation of counts, zero beyond the grid.
    Tabulated { xs: Vec<f64>, counts: Vec<f64> },
}

impl InitialCondition {
    pub fn exponential(lambda0: f64, mean: f64) -> Result<Self> {
        if !(lambda0 >= 0.0 && lambda0.is_finite()) {
            return Err(invalid("lambda0", format!("must be non-negative, got {lambda0}")));
        }
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(invalid("initial mean distance", format!("must be positive, got {mean}")));
        }
        Ok(Self::Exponential { lambda0, mean })
    }

    pub fn tabulated(xs: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != counts.len() {
            return Err(invalid("initial profile", "grid and counts must be non-empty and equally long"));
        }
        if xs.iter().chain(&counts).any(|v| !v.is_finite()) {
            return Err(Error::Data("initial profile contains non-finite values".into()));
        }
        if xs[0] != 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("initial profile grid", "must start at 0 and increase strictly"));
        }
        if counts.iter().any(|&c| c < 0.0) || counts.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("initial profile counts", "must be non-negative and non-increasing"));
        }
        Ok(Self::Tabulated { xs, counts })
    }

    pub fn lambda0(&self) -> f64 {
        self.profile(0.0)
    }

    /// `K(0, x)`; negative `x` counts every initial trip.
    pub fn profile(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            Self::Empty => 0.0,
            Self::Exponential { lambda0, mean } => lambda0 * (-x / mean).exp(),
            Self::Tabulated { xs, counts } => {
                let n = xs.len();
                if x > xs[n - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&a| a <= x);
                if k == n {
                    return counts[n - 1];
                }
                counts[k - 1] + (x - xs[k - 1]) * (counts[k] - counts[k - 1]) / (xs[k] - xs[k - 1])
            }
        }
    }

    /// Initial trips whose remaining distance exceeds `x`.
    pub fn beyond(&self, x: f64) -> f64 {
        match self {
            Self::Tabulated { xs, .. } if x >= xs[xs.len() - 1] => 0.0,
            _ => self.profile(x),
        }
    }

    /// `int_x^inf K(0, y) dy`, the initial trip-miles beyond `x`.
    pub fn tail_integral(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            Self::Empty => 0.0,
            Self::Exponential { lambda0, mean } => lambda0 * mean * (-x / mean).exp(),
            Self::Tabulated { xs, .. } => {
                let mut total = 0.0;
                for k in 1..xs.len() {
                    let lo = x.max(xs[k - 1]);
                    let hi = xs[k];
                    if hi > lo {
                        total += 0.5 * (hi - lo) * (self.profile(lo) + self.profile(hi));
                    }
                }
                total
            }
        }
    }
}

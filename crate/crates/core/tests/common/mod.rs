#![allow(dead_code)]

use bathtub::demand::{DistanceDistribution, InfluxProfile, InitialCondition};
use bathtub::diagrams::FundamentalDiagram;
use bathtub::pwl::{Outside, PiecewiseLinear};
use bathtub::solver::{GridSpec, Horizon, Scenario};

pub const L: f64 = 10.0;

pub fn paper_fd() -> FundamentalDiagram {
    FundamentalDiagram::trapezoidal(30.0, 750.0, 10.0, 200.0).unwrap()
}

pub fn paper_pulse() -> InfluxProfile {
    InfluxProfile::trapezoidal_pulse(10000.0, 4000.0, 1.0).unwrap()
}

pub fn paper_mean() -> PiecewiseLinear {
    PiecewiseLinear::new(&[(0.0, 2.0), (0.4, 5.0), (0.6, 5.0), (1.0, 2.0)], Outside::Clamp).unwrap()
}

/// The peak-period example: uniform distances on a grid wide enough for their support.
pub fn paper_scenario(dx: f64) -> Scenario {
    paper_scenario_with(dx, paper_pulse())
}

pub fn paper_scenario_with(dx: f64, influx: InfluxProfile) -> Scenario {
    Scenario::new(
        L,
        paper_fd(),
        influx,
        DistanceDistribution::uniform(paper_mean()).unwrap(),
        InitialCondition::Empty,
        GridSpec::new(dx, 10.0, Horizon::MaxDistance(30.0)).unwrap(),
    )
    .unwrap()
}

pub fn constant_mean(b: f64) -> PiecewiseLinear {
    PiecewiseLinear::constant(b)
}

pub fn pow2(k: i32) -> f64 {
    0.5f64.powi(k)
}

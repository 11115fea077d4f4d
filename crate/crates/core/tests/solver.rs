mod common;

use approx::assert_relative_eq;
use bathtub::analysis::audit;
use bathtub::demand::{DistanceDistribution, InfluxProfile, InitialCondition};
use bathtub::diagrams::{ExtendedSpeedRelation, FundamentalDiagram};
use bathtub::pwl::{Outside, PiecewiseLinear};
use bathtub::solver::{
    outflux_series, reconstruct_k, remaining_distance_stats, solve_characteristic, solve_integral,
    solve_mobility_service, solve_multi_commodity, Commodity, GridSpec, Horizon, JointState, MobilityScenario,
    Scenario, Termination, Trajectory, VehicleDensity,
};
use bathtub::Error;
use common::*;
use proptest::prelude::*;

fn both(s: &Scenario) -> [Trajectory; 2] {
    [solve_characteristic(s).unwrap(), solve_integral(s).unwrap()]
}

fn empty_scenario(dx: f64) -> Scenario {
    Scenario::new(
        L,
        paper_fd(),
        InfluxProfile::zero(),
        DistanceDistribution::uniform(constant_mean(2.0)).unwrap(),
        InitialCondition::Empty,
        GridSpec::new(dx, 5.0, Horizon::MaxTime(1.0)).unwrap(),
    )
    .unwrap()
}

fn exponential_decay(dx: f64) -> Scenario {
    Scenario::new(
        L,
        FundamentalDiagram::greenshields(30.0, 200.0).unwrap(),
        InfluxProfile::zero(),
        DistanceDistribution::exponential(1.0).unwrap(),
        InitialCondition::exponential(100.0, 1.0).unwrap(),
        GridSpec::new(dx, 16.0, Horizon::MaxDistance(2.0)).unwrap(),
    )
    .unwrap()
}

#[test]
fn empty_network_flows_freely() {
    for traj in both(&empty_scenario(0.125)) {
        assert_eq!(traj.termination, Termination::HorizonReached);
        for j in 0..traj.series.len() {
            assert_eq!(traj.series.lambda[j], 0.0);
            assert_relative_eq!(traj.series.z[j], 30.0 * traj.series.t[j], max_relative = 1e-12);
        }
        assert!(outflux_series(&traj).primary.iter().all(|&g| g == 0.0));
    }
}

#[test]
fn paper_peak_falls_late_in_the_pulse() {
    for traj in both(&paper_scenario(pow2(6))) {
        let (t_peak, _) = traj.peak_lambda();
        assert!((0.75..=1.0).contains(&t_peak), "{:?} peaks at {t_peak}", traj.scheme);
    }
}

#[test]
fn exponential_profile_decays_along_distance() {
    for traj in both(&exponential_decay(pow2(6))) {
        let t1 = traj.time_at_distance(1.0).unwrap();
        let lambda = traj.sample(&traj.series.lambda, t1);
        assert_relative_eq!(lambda, 100.0 * (-1.0f64).exp(), max_relative = 0.01);
    }
}

#[test]
fn characteristic_shift_is_exact_without_influx() {
    let s = exponential_decay(pow2(4));
    let traj = solve_characteristic(&s).unwrap();
    for st in &traj.states {
        for (i, k) in st.k.iter().enumerate() {
            let y = i as f64 * st.dx + st.z;
            let expected = if y <= 16.0 + 1e-9 { s.ic.profile(y) } else { 0.0 };
            assert!((k - expected).abs() <= 1e-9 * 100.0, "t={} x={} {k} vs {expected}", st.t, i as f64 * st.dx);
        }
    }
}

#[test]
fn total_trips_are_conserved_and_profiles_stay_monotone() {
    for traj in both(&paper_scenario(pow2(5))) {
        let report = audit(&traj);
        assert!(report.total_trip_residual < 1e-9, "{:?}: {}", traj.scheme, report.total_trip_residual);
        assert_eq!(report.monotonicity_violations, 0);
        for st in &traj.states {
            assert_eq!(st.k[0], st.lambda);
            assert!(st.k.iter().all(|&k| k >= 0.0));
        }
    }
}

#[test]
fn reconstruction_matches_stored_profiles() {
    for traj in both(&paper_scenario(pow2(4))) {
        for st in traj.states.iter().step_by(7) {
            for (i, k) in st.k.iter().enumerate().step_by(5) {
                let r = reconstruct_k(&traj, st.t, i as f64 * st.dx).unwrap();
                assert!((r - k).abs() <= 1e-9 * st.lambda.max(1.0), "{:?} t={} i={i}: {r} vs {k}", traj.scheme, st.t);
            }
        }
        let (t_peak, peak) = traj.peak_lambda();
        assert_relative_eq!(reconstruct_k(&traj, t_peak, 0.0).unwrap(), peak, max_relative = 1e-9);
        assert!(reconstruct_k(&traj, t_peak, 10.0).unwrap().abs() < 1e-9);
        assert!(matches!(reconstruct_k(&traj, t_peak, 10.5), Err(Error::Range { .. })));
    }
}

#[test]
fn reconstruction_without_influx_is_the_shifted_initial_profile() {
    let s = exponential_decay(pow2(4));
    let traj = solve_integral(&s).unwrap();
    let t = traj.time_at_distance(1.3).unwrap();
    for x in [0.0, 0.5, 2.0, 7.25] {
        let z = traj.distance_at(t).unwrap();
        assert_relative_eq!(reconstruct_k(&traj, t, x).unwrap(), s.ic.profile(x + z), max_relative = 1e-12);
    }
}

#[test]
fn shorter_effective_distance_exits_first() {
    let traj = solve_characteristic(&paper_scenario(pow2(4))).unwrap();
    let dist = DistanceDistribution::uniform(paper_mean()).unwrap();
    // Each sampled trip: entry time, effective distance, and the first time K at
    // its characteristic drops to its rank among trips of the same entry.
    let trips: Vec<(f64, f64)> = traj
        .entries
        .iter()
        .step_by(11)
        .flat_map(|e| {
            let b = dist.mean_distance(e.t).unwrap();
            [0.3, 1.0, 1.7].map(|q| (e.z + q * b, q))
        })
        .collect();
    let exit = |theta: f64| traj.time_at_distance(theta);
    for a in &trips {
        for b in &trips {
            if a.0 < b.0 {
                if let (Some(ta), Some(tb)) = (exit(a.0), exit(b.0)) {
                    assert!(ta <= tb);
                }
            }
        }
    }
    // The trip at effective distance theta is still counted just before tau(theta).
    for &(theta, _) in trips.iter().take(40) {
        if let Some(t_exit) = exit(theta) {
            let t_before = (t_exit - 0.01).max(0.0);
            let x = theta - traj.distance_at(t_before).unwrap();
            if (0.0..=10.0).contains(&x) {
                assert!(reconstruct_k(&traj, t_before, x).unwrap() > 0.0);
            }
        }
    }
}

#[test]
fn doubling_demand_never_lowers_the_trip_count() {
    let dx = pow2(5);
    let grid = GridSpec::new(dx, 10.0, Horizon::MaxTime(1.5)).unwrap().with_dt(dx / 30.0).unwrap();
    let base = paper_scenario(dx);
    let mut s1 = base.clone();
    s1.grid = grid.clone();
    let mut s2 = s1.clone();
    s2.influx = InfluxProfile::trapezoidal_pulse(20000.0, 8000.0, 1.0).unwrap();
    let (a, b) = (solve_integral(&s1).unwrap(), solve_integral(&s2).unwrap());
    let n = a.series.len().min(b.series.len());
    for j in 0..n {
        assert_eq!(a.series.t[j], b.series.t[j]);
        assert!(b.series.lambda[j] >= a.series.lambda[j] - 1e-9, "step {j}");
    }
}

#[test]
fn piecewise_constant_speed_takes_only_step_values() {
    let steps = vec![(0.0, 30.0), (10.0, 20.0), (20.0, 10.0), (40.0, 0.0)];
    let fd = FundamentalDiagram::piecewise_constant(steps.clone(), false).unwrap();
    let s = Scenario::new(
        L,
        fd,
        InfluxProfile::trapezoidal_pulse(10000.0, 3000.0, 1.0).unwrap(),
        DistanceDistribution::uniform(constant_mean(2.0)).unwrap(),
        InitialCondition::Empty,
        GridSpec::new(pow2(5), 4.0, Horizon::MaxTime(2.0)).unwrap(),
    )
    .unwrap();
    let traj = solve_characteristic(&s).unwrap();
    let mut seen = Vec::new();
    for (l, v) in traj.series.lambda.iter().zip(&traj.series.v) {
        assert!(steps.iter().any(|st| st.1 == *v), "speed {v}");
        let expected = steps.iter().rev().find(|st| l / L >= st.0).unwrap().1;
        assert_eq!(*v, expected);
        if seen.last() != Some(v) {
            seen.push(*v);
        }
    }
    assert!(seen.contains(&20.0) && seen.contains(&10.0), "{seen:?}");
}

#[test]
fn truncation_beyond_the_grid_is_rejected_unless_allowed() {
    let make = |allow: bool| {
        Scenario::new(
            L,
            paper_fd(),
            InfluxProfile::constant(1000.0).unwrap(),
            DistanceDistribution::exponential(2.0).unwrap(),
            InitialCondition::Empty,
            GridSpec::new(0.125, 5.0, Horizon::MaxTime(0.5)).unwrap().allowing_truncation(allow),
        )
        .unwrap()
    };
    assert!(matches!(solve_characteristic(&make(false)), Err(Error::Truncation { .. })));
    assert!(matches!(solve_integral(&make(false)), Err(Error::Truncation { .. })));
    let traj = solve_characteristic(&make(true)).unwrap();
    assert!(traj.truncated_mass > 0.0);
}

#[test]
fn sustained_overload_gridlocks() {
    let mut s = paper_scenario_with(pow2(4), InfluxProfile::constant(4000.0).unwrap());
    s.distance = DistanceDistribution::uniform(constant_mean(2.0)).unwrap();
    s.grid = GridSpec::new(pow2(4), 4.0, Horizon::MaxTime(6.0)).unwrap();
    for traj in both(&s) {
        assert_eq!(traj.termination, Termination::Gridlock);
        // Trips keep accumulating as the network locks up.
        let n = traj.series.len();
        let tail = &traj.series.lambda[n * 9 / 10..];
        assert!(tail.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}

#[test]
fn remaining_distance_statistics() {
    let traj = solve_characteristic(&exponential_decay(pow2(5))).unwrap();
    for st in traj.states.iter().step_by(16) {
        let stats = remaining_distance_stats(st).unwrap();
        assert!((stats.mean - 1.0).abs() < 2.0 * pow2(5), "{}", stats.mean);
        assert_eq!(stats.survival[0], 1.0);
    }

    let initial_mean = |ic: InitialCondition| {
        let s = Scenario::new(
            L,
            paper_fd(),
            InfluxProfile::zero(),
            DistanceDistribution::exponential(1.0).unwrap(),
            ic,
            GridSpec::new(0.125, 4.0, Horizon::MaxTime(0.01)).unwrap(),
        )
        .unwrap();
        remaining_distance_stats(&solve_characteristic(&s).unwrap().states[0]).unwrap().mean
    };
    // A box is resolved to within half a cell; a linear ramp is exact.
    let box_ic = InitialCondition::tabulated(vec![0.0, 1.5, 1.5 + 1e-9], vec![80.0, 80.0, 0.0]).unwrap();
    assert!((initial_mean(box_ic) - 1.5).abs() <= 0.0625 + 1e-12);
    let ramp_ic = InitialCondition::tabulated(vec![0.0, 3.0], vec![80.0, 0.0]).unwrap();
    assert_relative_eq!(initial_mean(ramp_ic), 1.5, max_relative = 1e-12);

    let empty = &solve_characteristic(&empty_scenario(0.25)).unwrap().states[0];
    assert!(matches!(remaining_distance_stats(empty), Err(Error::Undefined(_))));
}

#[test]
fn exponential_outflux_is_proportional_to_flow() {
    let mut s = exponential_decay(pow2(6));
    s.influx = InfluxProfile::constant(1500.0).unwrap();
    s.grid = GridSpec::new(pow2(6), 16.0, Horizon::MaxTime(1.0)).unwrap();
    let traj = solve_characteristic(&s).unwrap();
    let est = outflux_series(&traj);
    for (j, g) in est.primary.iter().enumerate().step_by(50) {
        let lv = traj.series.lambda[j] * traj.series.v[j];
        assert!((g - lv).abs() <= 0.03 * lv.max(1.0), "step {j}: {g} vs {lv}");
    }
    for &(t, g) in est.kinematic.iter().step_by(50) {
        let lv = traj.sample(&traj.series.lambda, t) * traj.sample(&traj.series.v, t);
        assert!((g - lv).abs() <= 0.03 * lv.max(1.0));
    }
}

fn commodity(influx: InfluxProfile) -> Commodity {
    Commodity { influx, distance: DistanceDistribution::uniform(paper_mean()).unwrap(), ic: InitialCondition::Empty }
}

#[test]
fn one_commodity_reduces_to_the_integral_scheme() {
    let dx = pow2(4);
    let mut s = paper_scenario(dx);
    s.grid = s.grid.clone().with_dt(dx / 30.0).unwrap();
    let single = solve_integral(&s).unwrap();
    let fd = paper_fd();
    let speed = |_: usize, js: &JointState| fd.speed(js.lambda[0] / js.lane_miles).unwrap();
    let multi = solve_multi_commodity(L, &[commodity(paper_pulse())], &speed, &s.grid).unwrap();
    assert_eq!(multi.len(), 1);
    assert_eq!(multi[0].series, single.series);
    assert_eq!(multi[0].states, single.states);
}

#[test]
fn commodities_decouple_and_share_symmetrically() {
    let dx = pow2(4);
    let grid = GridSpec::new(dx, 10.0, Horizon::MaxTime(1.5)).unwrap().with_dt(dx / 30.0).unwrap();
    let half = InfluxProfile::trapezoidal_pulse(5000.0, 2000.0, 1.0).unwrap();
    let pair = [commodity(half.clone()), commodity(paper_pulse())];
    let fd = paper_fd();

    let own = |m: usize, js: &JointState| fd.speed(js.lambda[m] / js.lane_miles).unwrap();
    let uncoupled = solve_multi_commodity(L, &pair, &own, &grid).unwrap();
    for (m, c) in pair.iter().enumerate() {
        let alone = solve_multi_commodity(L, std::slice::from_ref(c), &own, &grid).unwrap();
        assert_eq!(uncoupled[m].series, alone[0].series);
    }

    let shared = |_: usize, js: &JointState| fd.speed(js.lambda.iter().sum::<f64>() / js.lane_miles).unwrap();
    let sym = solve_multi_commodity(L, &[commodity(half.clone()), commodity(half)], &shared, &grid).unwrap();
    assert_eq!(sym[0].series, sym[1].series);
}

#[test]
fn multi_commodity_needs_a_time_step() {
    let fd = paper_fd();
    let speed = |_: usize, js: &JointState| fd.speed(js.lambda[0] / js.lane_miles).unwrap();
    let grid = GridSpec::new(0.125, 10.0, Horizon::MaxTime(1.0)).unwrap();
    assert!(solve_multi_commodity(L, &[commodity(paper_pulse())], &speed, &grid).is_err());
}

#[test]
fn mobility_service_reductions() {
    let dx = pow2(4);
    let s = paper_scenario(dx);
    let relation = ExtendedSpeedRelation::boarding_delay(paper_fd(), L, 0.0).unwrap();
    let mut m = MobilityScenario {
        lane_miles: L,
        relation,
        density: VehicleDensity::FromTrips,
        commodity: commodity(paper_pulse()),
        grid: s.grid.clone(),
    };
    let fed_back = solve_mobility_service(&m).unwrap();
    let plain = solve_integral(&s).unwrap();
    assert_eq!(fed_back.series, plain.series);

    m.density = VehicleDensity::Exogenous(PiecewiseLinear::constant(0.0));
    m.grid = GridSpec::new(dx, 10.0, Horizon::MaxTime(1.0)).unwrap();
    let free = solve_mobility_service(&m).unwrap();
    for j in 0..free.series.len() {
        assert_eq!(free.series.v[j], 30.0);
        assert_relative_eq!(free.series.z[j], 30.0 * free.series.t[j], max_relative = 1e-12);
    }
}

#[test]
fn mobility_service_outflux_follows_the_extended_flow() {
    let dx = pow2(6);
    let relation = ExtendedSpeedRelation::boarding_delay(paper_fd(), L, 0.001).unwrap();
    let density = PiecewiseLinear::new(&[(0.0, 10.0), (1.0, 30.0)], Outside::Clamp).unwrap();
    let m = MobilityScenario {
        lane_miles: L,
        relation,
        density: VehicleDensity::Exogenous(density),
        commodity: Commodity {
            influx: InfluxProfile::constant(800.0).unwrap(),
            distance: DistanceDistribution::exponential(1.0).unwrap(),
            ic: InitialCondition::exponential(200.0, 1.0).unwrap(),
        },
        grid: GridSpec::new(dx, 16.0, Horizon::MaxTime(1.0)).unwrap(),
    };
    let traj = solve_mobility_service(&m).unwrap();
    let s = &traj.series;
    for j in (0..s.len() - 1).step_by(40) {
        let lv = s.lambda[j] * s.v[j];
        assert!((s.g[j] - lv).abs() <= 0.03 * lv, "step {j}: {} vs {lv}", s.g[j]);
    }
}

fn random_scenario() -> impl Strategy<Value = Scenario> {
    (500.0..4000.0f64, 0.5..3.0f64, prop_oneof![Just(0u8), Just(1), Just(2)], 0.0..300.0f64).prop_map(
        |(plateau, mean, family, lambda0)| {
            let distance = match family {
                0 => DistanceDistribution::uniform(constant_mean(mean)).unwrap(),
                1 => DistanceDistribution::deterministic(constant_mean(mean)).unwrap(),
                _ => DistanceDistribution::exponential(mean / 3.0).unwrap(),
            };
            let ic = if lambda0 > 1.0 {
                InitialCondition::exponential(lambda0, mean / 4.0).unwrap()
            } else {
                InitialCondition::Empty
            };
            Scenario::new(
                L,
                paper_fd(),
                InfluxProfile::trapezoidal_pulse(10000.0, plateau, 1.0).unwrap(),
                distance,
                ic,
                GridSpec::new(0.125, 8.0, Horizon::MaxTime(1.5)).unwrap().allowing_truncation(true),
            )
            .unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn both_schemes_conserve_trips_and_keep_profiles_monotone(s in random_scenario()) {
        for traj in both(&s) {
            let report = audit(&traj);
            prop_assert!(report.total_trip_residual <= 1e-9, "{:?}: {}", traj.scheme, report.total_trip_residual);
            prop_assert_eq!(report.monotonicity_violations, 0);
            let t = &traj.series;
            prop_assert!(t.z.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(t.cum_in.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(t.cum_out.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            prop_assert!(t.v.iter().all(|&v| v >= 0.0));
            prop_assert!(t.lambda.iter().all(|&l| (0.0..=L * 200.0).contains(&l)));
        }
    }
}

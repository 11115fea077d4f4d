use bathtub::demand::{DistanceDistribution, InfluxProfile};
use bathtub::pwl::{Outside, PiecewiseLinear};
use proptest::prelude::*;

fn mean_profile() -> impl Strategy<Value = PiecewiseLinear> {
    prop::collection::vec((0.05..1.0f64, 0.2..8.0f64), 1..6).prop_map(|steps| {
        let mut t = 0.0;
        let nodes: Vec<(f64, f64)> = steps
            .into_iter()
            .map(|(dt, b)| {
                let node = (t, b);
                t += dt;
                node
            })
            .collect();
        PiecewiseLinear::new(&nodes, Outside::Clamp).unwrap()
    })
}

fn distributions() -> impl Strategy<Value = DistanceDistribution> {
    prop_oneof![
        mean_profile().prop_map(|m| DistanceDistribution::exponential_varying(m).unwrap()),
        mean_profile().prop_map(|m| DistanceDistribution::uniform(m).unwrap()),
        mean_profile().prop_map(|m| DistanceDistribution::deterministic(m).unwrap()),
    ]
}

fn influx_nodes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.01..0.5f64, 0.0..5000.0f64), 2..8).prop_map(|steps| {
        let mut t = 0.0;
        steps
            .into_iter()
            .map(|(dt, r)| {
                t += dt;
                (t, r)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn survival_is_bounded_and_non_increasing(d in distributions(), t in 0.0..5.0f64) {
        prop_assert_eq!(d.survival(t, 0.0).unwrap(), 1.0);
        let mut prev = 1.0;
        for k in 0..=2000 {
            let s = d.survival(t, k as f64 * 0.01).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn mean_matches_quadrature_of_survival(m in mean_profile(), t in 0.0..5.0f64) {
        for d in [
            DistanceDistribution::exponential_varying(m.clone()).unwrap(),
            DistanceDistribution::uniform(m.clone()).unwrap(),
        ] {
            let b = d.mean_distance(t).unwrap();
            let x_end = 40.0 * b;
            let n = 400_000;
            let h = x_end / n as f64;
            let quad: f64 = (0..n)
                .map(|i| 0.5 * h * (d.survival(t, i as f64 * h).unwrap() + d.survival(t, (i + 1) as f64 * h).unwrap()))
                .sum();
            prop_assert!((quad - b).abs() <= 1e-6 * b, "quad {} mean {}", quad, b);
        }
    }

    #[test]
    fn cumulative_inflow_is_monotone_and_exact(nodes in influx_nodes()) {
        let p = InfluxProfile::piecewise_linear(&nodes).unwrap();
        let end = nodes.last().unwrap().0 + 0.3;
        let mut prev = 0.0;
        for i in 0..=1000 {
            let c = p.cumulative(end * i as f64 / 1000.0).unwrap();
            prop_assert!(c >= prev);
            prev = c;
        }
        // Midpoint sums aligned with the nodes; the rate is linear inside each cell.
        let mut riemann = 0.0;
        for w in nodes.windows(2) {
            let n = 1000;
            let h = (w[1].0 - w[0].0) / n as f64;
            riemann += (0..n).map(|i| p.rate(w[0].0 + (i as f64 + 0.5) * h).unwrap() * h).sum::<f64>();
        }
        let exact = p.cumulative(end).unwrap();
        prop_assert!((exact - riemann).abs() <= 1e-8 * exact.max(1.0), "{} vs {}", exact, riemann);
    }
}

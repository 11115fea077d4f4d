use crate::solver::Trajectory;

/// Conservation residuals at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub t: f64,
    /// `|G - (lambda0 + F - lambda)| / max(1, lambda0 + F)`.
    pub total_trips: f64,
    /// Trip-miles residual, at steps with a stored K profile.
    pub trip_miles: Option<f64>,
    /// K-profile monotonicity violations at this step.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Largest relative total-trip residual.
    pub total_trip_residual: f64,
    /// Largest absolute trip-miles residual; `None` without stored profiles.
    pub trip_miles_residual: Option<f64>,
    pub truncation_mass: f64,
    pub monotonicity_violations: usize,
    pub rows: Vec<AuditRow>,
}

/// Checks conservation of total trips at every step and conservation of
/// trip-miles at every stored profile:
/// `int_0^X K(0,x) dx + int f B~_X dt - int lambda v dt - int_0^X K(t,x) dx = 0`,
/// where `B~_X` is the mean entering distance with trips clamped at `X`.
/// Time integrals use the trapezoid rule on the stored series.
pub fn audit(traj: &Trajectory) -> AuditReport {
    let s = &traj.series;
    let n = s.len();
    let lambda0 = s.lambda[0];

    let mut served = vec![0.0; n];
    let mut demanded = vec![0.0; n];
    let x_max = traj.x_grid.map_or(f64::INFINITY, |g| g.1);
    let clamped_mean = |t: f64| {
        traj.model.as_ref().map_or(0.0, |m| {
            let slice = m.distance.slice(t);
            if x_max.is_finite() {
                slice.mean() - slice.tail_integral(x_max)
            } else {
                slice.mean()
            }
        })
    };
    let mut prev_demand = s.f[0] * clamped_mean(s.t[0]);
    for j in 1..n {
        let dt = s.t[j] - s.t[j - 1];
        served[j] = served[j - 1] + 0.5 * dt * (s.lambda[j - 1] * s.v[j - 1] + s.lambda[j] * s.v[j]);
        let demand = s.f[j] * clamped_mean(s.t[j]);
        demanded[j] = demanded[j - 1] + 0.5 * dt * (prev_demand + demand);
        prev_demand = demand;
    }

    let miles = |k: &[f64], dx: f64| k.windows(2).map(|w| 0.5 * dx * (w[0] + w[1])).sum::<f64>();
    let initial_miles = traj.states.first().map(|st| miles(&st.k, st.dx));

    let mut rows: Vec<AuditRow> = (0..n)
        .map(|j| {
            let entered = lambda0 + s.cum_in[j];
            AuditRow {
                t: s.t[j],
                total_trips: (s.cum_out[j] - (entered - s.lambda[j])).abs() / entered.max(1.0),
                trip_miles: None,
                violations: 0,
            }
        })
        .collect();

    let mut violations = 0;
    for st in &traj.states {
        let scale = st.k[0].abs().max(1.0);
        let bad = st.k.iter().filter(|&&k| k < -1e-12).count()
            + st.k.windows(2).filter(|w| w[1] > w[0] + 1e-9 * scale).count();
        violations += bad;
        let j = s.t.partition_point(|&t| t < st.t);
        if j < n && s.t[j] == st.t {
            rows[j].violations = bad;
            if let Some(m0) = initial_miles {
                rows[j].trip_miles = Some((m0 + demanded[j] - served[j] - miles(&st.k, st.dx)).abs());
            }
        }
    }

    AuditReport {
        total_trip_residual: rows.iter().map(|r| r.total_trips).fold(0.0, f64::max),
        trip_miles_residual: rows.iter().filter_map(|r| r.trip_miles).reduce(f64::max),
        truncation_mass: traj.truncated_mass,
        monotonicity_violations: violations,
        rows,
    }
}

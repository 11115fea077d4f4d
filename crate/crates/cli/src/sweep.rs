use std::path::Path;
use std::thread;

use bathtub::analysis::{order_from_values, ConvergenceReport};
use bathtub::solver::Termination;

use crate::config::RawConfig;
use crate::error::{CliError, Result};
use crate::run::solve;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub peak_lambda: f64,
    pub peak_time: f64,
    pub termination: Termination,
    /// Time at which `z` reaches the sweep's target, if set and reached.
    pub time_to_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// The run's summary, or the error that stopped it.
    pub outcome: std::result::Result<RunSummary, String>,
}

fn summarize(raw: &RawConfig, key: &str, value: f64, target_z: Option<f64>) -> std::result::Result<RunSummary, String> {
    let mut raw = raw.clone();
    raw.set_numeric(key, value).map_err(|e| e.to_string())?;
    let config = raw.build().map_err(|e| e.to_string())?;
    let traj = solve(&config.model).map_err(|e| e.to_string())?;
    let (peak_time, peak_lambda) = traj.peak_lambda();
    Ok(RunSummary {
        peak_lambda,
        peak_time,
        termination: traj.termination,
        time_to_z: target_z.and_then(|z| traj.time_at_distance(z)),
    })
}

/// One run per value of `key`, executed concurrently.
pub fn sweep(raw: &RawConfig, key: &str, values: &[f64], target_z: Option<f64>) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Sweep("the value list is empty".into()));
    }
    // Reject a bad key before fanning out.
    raw.clone().set_numeric(key, values[0])?;
    let rows = thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&value| scope.spawn(move || SweepRow { value, outcome: summarize(raw, key, value, target_z) }))
            .collect();
        handles
            .into_iter()
            .zip(values)
            .map(|(h, &value)| h.join().unwrap_or(SweepRow { value, outcome: Err("run panicked".into()) }))
            .collect()
    });
    Ok(rows)
}

/// Order of convergence of the time to reach the target distance, for a
/// sweep over halving grid steps.
pub fn convergence(rows: &[SweepRow]) -> Result<ConvergenceReport> {
    if rows.len() < 3 {
        return Err(CliError::Sweep("a convergence study needs at least three values".into()));
    }
    if rows.windows(2).any(|w| (w[0].value - 2.0 * w[1].value).abs() > 1e-12 * w[0].value) {
        return Err(CliError::Sweep("convergence values must halve successively".into()));
    }
    let values = rows
        .iter()
        .map(|r| match &r.outcome {
            Ok(RunSummary { time_to_z: Some(t), .. }) => Ok(*t),
            Ok(_) => Err(CliError::Sweep(format!("run at {} never reached the target distance", r.value))),
            Err(e) => Err(CliError::Sweep(format!("run at {} failed: {e}", r.value))),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(order_from_values(rows.iter().map(|r| r.value).collect(), values))
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::HorizonReached => "horizon",
        Termination::Gridlock => "gridlock",
    }
}

/// `value,peak_lambda,peak_time,termination,time_to_z,error`.
pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["value", "peak_lambda", "peak_time", "termination", "time_to_z", "error"]).map_err(csv_err)?;
    for r in rows {
        let record = match &r.outcome {
            Ok(s) => [
                r.value.to_string(),
                s.peak_lambda.to_string(),
                s.peak_time.to_string(),
                termination_name(s.termination).to_string(),
                s.time_to_z.map_or(String::new(), |t| t.to_string()),
                String::new(),
            ],
            Err(e) => [r.value.to_string(), String::new(), String::new(), "error".into(), String::new(), e.clone()],
        };
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

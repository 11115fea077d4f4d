//! CSV writers. Numbers use the shortest representation that round-trips.

use std::fs::File;
use std::path::Path;

use bathtub::analysis::{audit, average_travel_time};
use bathtub::solver::Trajectory;
use bathtub::Error;

use crate::error::{CliError, Result};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

fn write_row<I, S>(w: &mut csv::Writer<File>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

fn close(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// `t,z,lambda,v,f,F,g,G`, one row per solver step.
pub fn write_series(path: &Path, traj: &Trajectory) -> Result<()> {
    let s = &traj.series;
    let mut w = writer(path)?;
    write_row(&mut w, path, ["t", "z", "lambda", "v", "f", "F", "g", "G"])?;
    for j in 0..s.len() {
        let row = [s.t[j], s.z[j], s.lambda[j], s.v[j], s.f[j], s.cum_in[j], s.g[j], s.cum_out[j]];
        write_row(&mut w, path, row.map(|v| v.to_string()))?;
    }
    close(w, path)
}

/// Header `t` followed by the x-grid; each row a stored time and its K profile.
pub fn write_ksurface(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    let Some(first) = traj.states.first() else {
        return Err(CliError::Solver(Error::Undefined("run stored no K profiles".into())));
    };
    let header = std::iter::once("t".to_string()).chain((0..first.k.len()).map(|i| (i as f64 * first.dx).to_string()));
    write_row(&mut w, path, header)?;
    for st in &traj.states {
        write_row(&mut w, path, std::iter::once(st.t).chain(st.k.iter().copied()).map(|v| v.to_string()))?;
    }
    close(w, path)
}

/// `t,total_trips,trip_miles,violations`; `trip_miles` is empty between stored profiles.
pub fn write_audit(path: &Path, traj: &Trajectory) -> Result<()> {
    let report = audit(traj);
    let mut w = writer(path)?;
    write_row(&mut w, path, ["t", "total_trips", "trip_miles", "violations"])?;
    for r in &report.rows {
        let miles = r.trip_miles.map_or(String::new(), |m| m.to_string());
        write_row(&mut w, path, [r.t.to_string(), r.total_trips.to_string(), miles, r.violations.to_string()])?;
    }
    close(w, path)
}

/// `t,exact,approx_entry,approx_exit` for every step whose trips all finish within the run.
pub fn write_travel_times(path: &Path, traj: &Trajectory) -> Result<()> {
    let model = traj
        .model
        .as_ref()
        .ok_or_else(|| CliError::Solver(Error::Undefined("run carries no distance distribution".into())))?;
    let mut w = writer(path)?;
    write_row(&mut w, path, ["t", "exact", "approx_entry", "approx_exit"])?;
    for &t in &traj.series.t {
        match average_travel_time(traj, &model.distance, t) {
            Ok(tt) => write_row(&mut w, path, [t, tt.exact, tt.approx_entry, tt.approx_exit].map(|v| v.to_string()))?,
            Err(Error::NotCompleted { .. }) => break,
            Err(e) => return Err(e.into()),
        }
    }
    close(w, path)
}

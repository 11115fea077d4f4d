use std::path::Path;

use bathtub::solver::{solve_characteristic, solve_integral, Termination, Trajectory};
use bathtub::special::{solve_constant_distance, solve_deterministic, solve_vickrey};

use crate::config::{ModelSetup, Output, RunConfig, SchemeChoice};
use crate::error::{CliError, Result};
use crate::output;

/// Runs the configured solver.
pub fn solve(model: &ModelSetup) -> bathtub::Result<Trajectory> {
    match model {
        ModelSetup::Generalized { scenario, scheme: SchemeChoice::Characteristic } => solve_characteristic(scenario),
        ModelSetup::Generalized { scenario, scheme: SchemeChoice::Integral } => solve_integral(scenario),
        ModelSetup::Vickrey(c) => solve_vickrey(c),
        ModelSetup::Deterministic(c) => solve_deterministic(c),
        ModelSetup::Constant(c) => solve_constant_distance(c).map(|sol| sol.trajectory),
    }
}

/// Solves and writes the requested outputs into `out_dir`, also after gridlock.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Trajectory> {
    let traj = solve(&config.model)?;
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io { path: out_dir.to_path_buf(), source })?;
    for &o in &config.outputs {
        let path = out_dir.join(o.file_name());
        match o {
            Output::Series => output::write_series(&path, &traj)?,
            Output::KSurface => output::write_ksurface(&path, &traj)?,
            Output::Audit => output::write_audit(&path, &traj)?,
            Output::TravelTimes => output::write_travel_times(&path, &traj)?,
        }
    }
    Ok(traj)
}

/// Process exit code for a finished run.
pub fn exit_code(termination: Termination) -> u8 {
    match termination {
        Termination::HorizonReached => 0,
        Termination::Gridlock => 2,
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bathtub_cli::run::{exit_code, run};
use bathtub_cli::sweep::{convergence, sweep, write_summary};
use bathtub_cli::{CliError, RawConfig, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bathtub", version, about = "Generalized bathtub model solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its outputs.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a configuration once per value of a numeric key.
    Sweep {
        config: PathBuf,
        /// Key to vary, e.g. `demand.influx.plateau`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Distance whose arrival time each run reports.
        #[arg(long)]
        target_z: Option<f64>,
        /// Estimate the convergence order of the arrival time (values must halve).
        #[arg(long)]
        convergence: bool,
        /// Summary CSV path; defaults to `sweep.csv` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    RawConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Sweep(format!("`{s}` is not a number"))))
        .collect()
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?.build()?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let traj = run(&cfg, &dir)?;
            let (t_peak, peak) = traj.peak_lambda();
            println!(
                "{:?} after {} steps: t = {} h, z = {} mi, peak lambda {} at t = {} h",
                traj.termination,
                traj.series.len() - 1,
                traj.final_time(),
                traj.final_distance(),
                peak,
                t_peak
            );
            Ok(exit_code(traj.termination))
        }
        Command::Sweep { config, param, values, target_z, convergence: study, out } => {
            let raw = load(&config)?;
            let values = parse_values(&values)?;
            if study && target_z.is_none() {
                return Err(CliError::Sweep("--convergence needs --target-z".into()));
            }
            let rows = sweep(&raw, &param, &values, target_z)?;
            let path = match out {
                Some(p) => p,
                None => {
                    let dir = raw.build().map(|c| c.output_dir).unwrap_or_else(|_| raw.base_dir().join("output"));
                    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
                    dir.join("sweep.csv")
                }
            };
            write_summary(&path, &rows)?;
            println!("{} runs written to {}", rows.len(), path.display());
            if study {
                let report = convergence(&rows)?;
                match (&report.orders, report.mean_order) {
                    (Some(orders), Some(mean)) => println!("orders {orders:?}, mean {mean}"),
                    _ if report.exact => println!("all levels agree to round-off"),
                    _ => println!("differences are not monotone; no order estimate (ratios {:?})", report.ratios),
                }
            }
            Ok(if rows.iter().any(|r| r.outcome.is_err()) { 1 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

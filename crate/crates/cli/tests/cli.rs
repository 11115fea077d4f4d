use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use bathtub_cli::config::{ModelSetup, Output, SchemeChoice};
use bathtub_cli::sweep::{convergence, sweep};
use bathtub_cli::{parse_config, CliError, RawConfig};

const BASE: &str = "\
network.L = 10
fd.variant = trapezoidal
fd.u = 30
fd.C = 750
fd.w = 10
fd.kappa = 200
demand.distance.kind = uniform
demand.distance.B = 2
grid.dx = 0.0625
grid.X = 4
grid.stop = t:1
";

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn bathtub(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bathtub")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse_config(BASE, Path::new("/tmp/cfg")).unwrap();
    assert_eq!(cfg.outputs.iter().copied().collect::<Vec<_>>(), vec![Output::Series]);
    assert_eq!(cfg.output_dir, Path::new("/tmp/cfg/output"));
    match cfg.model {
        ModelSetup::Generalized { scenario, scheme } => {
            assert_eq!(scheme, SchemeChoice::Characteristic);
            assert_eq!(scenario.ic.lambda0(), 0.0);
            assert_eq!(scenario.influx.rate(0.3).unwrap(), 0.0);
        }
        other => panic!("unexpected model {other:?}"),
    }
}

#[test]
fn invalid_values_name_their_key() {
    let text = BASE.replace("fd.kappa = 200", "fd.kappa = -5");
    let err = parse_config(&text, Path::new(".")).unwrap_err();
    assert!(matches!(&err, CliError::Invalid { key, .. } if key == "fd.kappa"), "{err}");
    assert!(err.to_string().contains("fd.kappa"));
}

#[test]
fn duplicate_keys_cite_both_lines() {
    let text = format!("{BASE}fd.u = 40\n");
    let err = parse_config(&text, Path::new(".")).unwrap_err();
    assert!(matches!(err, CliError::Duplicate { first: 3, second: 12, .. }), "{err}");
    assert!(err.to_string().contains("lines 3 and 12"));
}

#[test]
fn syntax_and_unknown_keys_are_rejected() {
    assert!(matches!(parse_config("network.L 10", Path::new(".")), Err(CliError::Syntax { line: 1, .. })));
    assert!(matches!(
        parse_config("# comment\nnetwork.size = 10", Path::new(".")),
        Err(CliError::UnknownKey { line: 2, .. })
    ));
    assert!(matches!(parse_config("network.L =", Path::new(".")), Err(CliError::Syntax { .. })));
    let missing = BASE.replace("grid.stop = t:1\n", "");
    assert!(matches!(parse_config(&missing, Path::new(".")), Err(CliError::Missing(k)) if k == "grid.stop"));
    let stray = format!("{BASE}ic.lambda0 = 5\n");
    assert!(matches!(parse_config(&stray, Path::new(".")), Err(CliError::Invalid { key, .. }) if key == "ic.lambda0"));
    let bad_stop = BASE.replace("t:1", "q:1");
    assert!(parse_config(&bad_stop, Path::new(".")).is_err());
}

#[test]
fn node_keys_accumulate_and_match_the_peak_profile() {
    let text = BASE.replace(
        "demand.distance.B = 2",
        "demand.distance.Btilde_nodes = 0:2, 0.4:5\ndemand.distance.Btilde_nodes = 0.6:5, 1.0:2",
    );
    let cfg = parse_config(&text, Path::new(".")).unwrap();
    let ModelSetup::Generalized { scenario, .. } = cfg.model else { panic!() };
    for k in 0..=240 {
        let t = k as f64 / 200.0;
        let formula = 2.0 + (7.5 * t).min(3.0).min(7.5 * (1.0 - t)).max(0.0);
        let b = scenario.distance.mean_distance(t).unwrap();
        assert!((b - formula).abs() < 1e-12, "t={t}: {b} vs {formula}");
    }
}

#[test]
fn model_specific_constraints() {
    let vickrey = BASE.replace("uniform", "exponential").replace("grid.X = 4\n", "") + "model.kind = vickrey\n";
    assert!(matches!(parse_config(&vickrey, Path::new(".")).unwrap().model, ModelSetup::Vickrey(_)));
    let with_surface = format!("{vickrey}outputs = series,ksurface\n");
    assert!(matches!(parse_config(&with_surface, Path::new(".")), Err(CliError::Invalid { key, .. }) if key == "outputs"));
    let with_scheme = format!("{vickrey}model.scheme = integral\n");
    assert!(parse_config(&with_scheme, Path::new(".")).is_err());
    let constant = BASE.replace("uniform", "deterministic").replace("grid.X = 4\n", "") + "model.kind = constant\n";
    assert!(matches!(parse_config(&constant, Path::new(".")).unwrap().model, ModelSetup::Constant(_)));
    let wrong = BASE.replace("grid.X = 4\n", "") + "model.kind = constant\n";
    assert!(parse_config(&wrong, Path::new(".")).is_err());
}

#[test]
fn tables_load_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "fd.csv", "density,speed\n0,30\n20,30\n100,10\n200,0\n");
    write(dir.path(), "ic.csv", "x,count\n0,100\n2,50\n4,0\n");
    write(dir.path(), "survival.csv", "x,0,1\n0,1,1\n1,0.5,0.8\n3,0,0\n");
    let text = BASE
        .replace("fd.variant = trapezoidal\nfd.u = 30\nfd.C = 750\nfd.w = 10\nfd.kappa = 200", "fd.variant = tabulated\nfd.table = fd.csv")
        .replace("demand.distance.kind = uniform\ndemand.distance.B = 2", "demand.distance.kind = tabulated\ndemand.distance.table = survival.csv")
        + "ic.kind = tabulated\nic.table = ic.csv\n";
    let cfg = parse_config(&text, dir.path()).unwrap();
    let ModelSetup::Generalized { scenario, .. } = cfg.model else { panic!() };
    assert_eq!(scenario.fd.speed(60.0).unwrap(), 20.0);
    assert_eq!(scenario.ic.profile(1.0), 75.0);
    assert_eq!(scenario.distance.survival(0.5, 1.0).unwrap(), 0.65);

    let missing = text.replace("ic.csv", "absent.csv");
    assert!(matches!(parse_config(&missing, dir.path()), Err(CliError::Io { .. })));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("peak_period.conf");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = bathtub(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["series.csv", "ksurface.csv", "audit.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn series_csv_balances_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("peak_period.conf");
    let o = bathtub(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = read_csv(&dir.path().join("series.csv"));
    assert_eq!(header, ["t", "z", "lambda", "v", "f", "F", "g", "G"]);
    let lambda0 = rows[0][2];
    for r in &rows {
        let expected = lambda0 + r[5] - r[2];
        assert!((r[7] - expected).abs() <= 1e-9 * (lambda0 + r[5]).max(1.0), "{r:?}");
    }
    let peak = rows.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((0.75..=1.0).contains(&peak[0]));
    let (kheader, krows) = read_csv(&dir.path().join("ksurface.csv"));
    assert_eq!(kheader[0], "t");
    assert_eq!(kheader.len(), 641 + 1);
    assert!(krows.iter().all(|r| r.len() == kheader.len()));
}

#[test]
fn exit_codes_follow_termination() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let grid = bathtub(&["run", configs_dir().join("gridlock.conf").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(grid.status.code(), Some(2));
    assert!(out.join("series.csv").exists());

    let idle = write(dir.path(), "idle.conf", &format!("{BASE}outputs = series,audit,traveltimes\n"));
    let o = bathtub(&["run", idle.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = read_csv(&dir.path().join("output/series.csv"));
    assert!(rows.iter().all(|r| r[2] == 0.0));

    let broken = write(dir.path(), "broken.conf", &BASE.replace("fd.kappa = 200", "fd.kappa = -5"));
    let o = bathtub(&["run", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fd.kappa"));
    assert_eq!(bathtub(&["run", "/nonexistent.conf"]).status.code(), Some(1));
    assert_eq!(bathtub(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn travel_times_are_written_in_free_flow() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("demand.distance.B = 2", "demand.distance.B = 2\ndemand.influx.kind = constant\ndemand.influx.rate = 300")
        + "outputs = traveltimes\n";
    let cfg = write(dir.path(), "tt.conf", &text);
    assert_eq!(bathtub(&["run", cfg.to_str().unwrap()]).status.code(), Some(0));
    let (header, rows) = read_csv(&dir.path().join("output/traveltimes.csv"));
    assert_eq!(header, ["t", "exact", "approx_entry", "approx_exit"]);
    assert!(!rows.is_empty());
    for r in &rows {
        for v in &r[1..] {
            assert!((v - 2.0 / 30.0).abs() < 1e-9);
        }
    }
}

#[test]
fn special_models_run_from_configs() {
    let dir = tempfile::tempdir().unwrap();
    let vickrey = BASE.replace("uniform", "exponential").replace("grid.X = 4\n", "")
        + "model.kind = vickrey\nic.kind = exponential\nic.lambda0 = 100\nic.B = 2\noutputs = series,audit\n";
    let deterministic = BASE.replace("uniform", "deterministic").replace("grid.X = 4\n", "")
        + "model.kind = deterministic\ndemand.influx.kind = constant\ndemand.influx.rate = 1000\noutputs = series,ksurface\n";
    let constant = deterministic.replace("model.kind = deterministic", "model.kind = constant");
    for (name, text) in [("v.conf", vickrey), ("d.conf", deterministic), ("c.conf", constant)] {
        let path = write(dir.path(), name, &text);
        let out = dir.path().join(name.replace(".conf", ""));
        let o = bathtub(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("series.csv").exists());
    }
}

#[test]
fn plateau_sweep_responds_monotonically() {
    let text = fs::read_to_string(configs_dir().join("peak_period.conf")).unwrap().replace("0.015625", "0.0625");
    let raw = RawConfig::parse(&text, &configs_dir()).unwrap();
    let rows = sweep(&raw, "demand.influx.plateau", &[2000.0, 3000.0, 4000.0], None).unwrap();
    assert_eq!(rows.len(), 3);
    let peaks: Vec<f64> = rows.iter().map(|r| r.outcome.as_ref().unwrap().peak_lambda).collect();
    assert!(peaks.windows(2).all(|w| w[1] >= w[0]), "{peaks:?}");
    assert!(matches!(sweep(&raw, "demand.influx.plateau", &[], None), Err(CliError::Sweep(_))));
    assert!(sweep(&raw, "fd.variant", &[1.0], None).is_err());
}

#[test]
fn grid_sweep_converges_at_first_order() {
    let raw = RawConfig::parse(&fs::read_to_string(configs_dir().join("peak_period.conf")).unwrap(), &configs_dir()).unwrap();
    let levels = [0.125, 0.0625, 0.03125, 0.015625];
    let rows = sweep(&raw, "grid.dx", &levels, Some(30.0)).unwrap();
    let report = convergence(&rows).unwrap();
    let p = report.mean_order.unwrap();
    assert!((0.7..=1.3).contains(&p), "{report:?}");
}

#[test]
fn sweep_command_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = configs_dir().join("gridlock.conf");
    let o = bathtub(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "demand.influx.rate",
        "--values",
        "3000,4000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "value,peak_lambda,peak_time,termination,time_to_z,error");
    assert!(lines[1].starts_with("3000,") && lines[1].contains(",horizon,"));
    assert!(lines[2].starts_with("4000,") && lines[2].contains(",gridlock,"));
    let empty = bathtub(&["sweep", cfg.to_str().unwrap(), "--param", "demand.influx.rate", "--values", ""]);
    assert_eq!(empty.status.code(), Some(1));
}

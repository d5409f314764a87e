use std::fs;
use std::path::Path;
use std::process::Command;

use ttp::cli::{run, STATS_HEADER, TRAJECTORY_HEADER};
use ttp::config::{parse_config, parse_config_str};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn ttp(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["ttp"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn sample_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("rigid");
    let o = ttp(&[
        "simulate",
        &sample_config("rigid_rotation.cfg"),
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("termination = completed"));
    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER);
    let rows: Vec<&str> = lines.collect();
    // 3491 steps at stride 10, plus the final record
    assert_eq!(rows.len(), 351);
    assert!(rows.iter().all(|r| r.split(',').count() == 21));
    assert!(out_dir.join("summary.txt").exists());
}

#[test]
fn degenerate_records_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "[integrator]\ndt = 0.1\nt_end = 1\n[output]\ndirectory = {}\nformats = csv\n",
        dir.path().display()
    );
    let path = write(dir.path(), "u.cfg", &cfg);
    assert_eq!(ttp(&["simulate", &path]).code, 0);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[15], "NaN");
        assert_eq!(cols[20], "1");
    }
    assert!(!dir.path().join("summary.txt").exists());
}

#[test]
fn fields_check_reports_small_residuals() {
    let o = ttp(&["fields", "--check", "taylor_green"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let line = o
        .stdout
        .lines()
        .find(|l| l.starts_with("max residual"))
        .unwrap();
    let max: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(max < 1e-6);
}

#[test]
fn fields_check_failure_is_a_runtime_error() {
    // at h = 0.5 truncation error dominates
    let o = ttp(&["fields", "--check", "taylor_green", "--h", "0.5"]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("finite differences"));
    assert_eq!(ttp(&["fields", "--check", "vortex"]).code, 2);
    assert_eq!(
        ttp(&["fields", "--check", "uniform", "--param", "nu=1"]).code,
        2
    );
}

#[test]
fn fields_lists_builtins() {
    let o = ttp(&["fields"]);
    assert_eq!(o.code, 0);
    for name in [
        "uniform",
        "rigid_rotation",
        "taylor_green",
        "taylor_green_steady",
        "lamb_oseen",
        "grid",
    ] {
        assert!(o.stdout.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn out_of_domain_start_exits_3_naming_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "[field]\nname = taylor_green\nbounds_min = -1 -1 -1\nbounds_max = 1 1 1\n[particle]\nr0 = 2 0 0\n[output]\ndirectory = {}\n",
        dir.path().display()
    );
    let path = write(dir.path(), "c.cfg", &cfg);
    let o = ttp(&["simulate", &path]);
    assert_eq!(o.code, 3);
    assert!(
        o.stderr.contains("[-1, 1] x [-1, 1] x [-1, 1]"),
        "{}",
        o.stderr
    );
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "dt.cfg", "[integrator]\ndt = 0\n");
    let o = ttp(&["simulate", &path]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("dt must be positive"), "{}", o.stderr);

    let path = write(dir.path(), "syntax.cfg", "[particle]\nr0 = 1 2\n");
    let o = ttp(&["simulate", &path]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("line 2"), "{}", o.stderr);

    assert_eq!(ttp(&["simulate", "/nonexistent/run.cfg"]).code, 2);
    assert_eq!(ttp(&["integrate"]).code, 2);
    assert_eq!(ttp(&["--help"]).code, 0);
}

#[test]
fn printed_config_round_trips() {
    for name in [
        "rigid_rotation.cfg",
        "taylor_green.cfg",
        "lamb_oseen_ensemble.cfg",
    ] {
        let o = ttp(&["simulate", &sample_config(name), "--print-config"]);
        assert_eq!(o.code, 0);
        let original = parse_config(sample_config(name)).unwrap();
        assert_eq!(parse_config_str(&o.stdout).unwrap(), original, "{name}");
    }
}

#[test]
fn ensemble_writes_stats_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttp(&[
        "ensemble",
        &sample_config("lamb_oseen_ensemble.cfg"),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let csv = fs::read_to_string(dir.path().join("ensemble_stats.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), STATS_HEADER);
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 64.0);
    assert!(first[5..8].iter().all(|m| m.abs() < 1e-14));
    // 2000 steps at stride 50
    assert_eq!(csv.lines().count(), 1 + 41);
}

#[test]
fn verify_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "[field]\nname = rigid_rotation\n[particle]\nr0 = 1 0 0\nn0 = 0 0.8 0.6\n[integrator]\nt_end = 3.4906585039886591\n[verify]\npoints = 50\n[output]\ndirectory = {}\n",
        dir.path().display()
    );
    let path = write(dir.path(), "v.cfg", &cfg);
    let o = ttp(&["verify", &path]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("global position error"), "{}", o.stdout);
    for f in [
        "omega_identity.csv",
        "omega_fd_convergence.csv",
        "tangency_drift.csv",
        "convergence.csv",
        "verify_report.txt",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn exported_grid_drives_a_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("rigid.grid");
    let o = ttp(&[
        "fields",
        "--export",
        "rigid_rotation",
        "--nodes",
        "17",
        "--lo=-2,-2,-2",
        "--hi",
        "2,2,2",
        "--out",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let cfg = format!(
        "[field]\nname = grid\ngrid = rigid.grid\n[particle]\nr0 = 1 0 0\nn0 = 0 0.8 0.6\nbeta = 0.2\n[integrator]\ndt = 1e-2\nt_end = 1\n[output]\ndirectory = {}\n",
        dir.path().join("out").display()
    );
    let path = write(dir.path(), "g.cfg", &cfg);
    let o = ttp(&["simulate", &path]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("termination = completed"), "{}", o.stdout);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ttp");
    let status = Command::new(bin)
        .args(["fields", "--check", "lamb_oseen"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let out = Command::new(bin)
        .args(["simulate", "/nonexistent.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

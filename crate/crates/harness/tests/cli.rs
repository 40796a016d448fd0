use std::path::Path;
use std::process::{Command, Output};

use molsp_harness::report::{parse_num, Table};

fn molsp(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_molsp")).args(args).env("RUST_LOG", "warn").output().unwrap();
    assert!(out.status.success(), "molsp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn optimize_select_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    molsp(&["optimize", "--seed", "2", "--evals", "300", "--out", path(out)]);
    for f in ["fronts.csv", "metrics.csv", "summary.csv", "convergence.csv", "convergence.svg", "config.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let fronts = out.join("fronts.csv");
    let sel = dir.path().join("sel");
    let stdout = molsp(&["select", "--fronts", path(&fronts), "--out", path(&sel)]).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("most frequent winner"));
    let winners = Table::read(&sel.join("winners.csv")).unwrap();
    let total: usize = winners.rows.iter().map(|r| r[1].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 1000);

    let again = dir.path().join("again");
    molsp(&["metrics", "--fronts", path(&fronts), "--out", path(&again)]);
    assert_eq!(std::fs::read(out.join("metrics.csv")).unwrap(), std::fs::read(again.join("metrics.csv")).unwrap());
}

#[test]
fn molsp_switch_controls_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    molsp(&["optimize", "--seed", "1", "--evals", "100", "--molsp", "off", "--out", path(dir.path())]);
    let t = Table::read(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0][0], "nsga2");
}

#[test]
fn simulate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    molsp(&["simulate", "--controller", "lqr", "--overload", "3", "--out", path(out)]);
    let traj = Table::read(&out.join("trajectory_lqr_300.csv")).unwrap();
    assert_eq!(traj.rows.len(), 601);
    assert!(out.join("trajectory_lqr_300.svg").exists());

    molsp(&["compare", "--out", path(out)]);
    let t = Table::read(&out.join("compare.csv")).unwrap();
    assert_eq!(t.rows.len(), 12);
    let status = t.column("status").unwrap();
    assert!(t.rows.iter().all(|r| r[status] == "ok"));
    let rho = t.column("spectral_radius").unwrap();
    assert!(t.rows.iter().all(|r| parse_num(&r[rho]).unwrap() < 1.0));
    for pct in ["0", "100", "200", "300"] {
        assert!(out.join(format!("steering_{pct}.svg")).exists());
        assert!(out.join(format!("offset_{pct}.svg")).exists());
    }
}

#[test]
fn bad_arguments_fail() {
    let status = |args: &[&str]| Command::new(env!("CARGO_BIN_EXE_molsp")).args(args).output().unwrap().status;
    assert!(!status(&["simulate", "--controller", "pid"]).success());
    assert!(!status(&["optimize", "--problem", "quadratic"]).success());
    assert!(!status(&["metrics", "--fronts", "/nonexistent/fronts.csv"]).success());
}

use std::path::Path;
use std::process::{Command, Output};

fn bifurc(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bifurc"));
    cmd.args(args);
    if let Some(dir) = out {
        cmd.arg("--out-dir").arg(dir);
    }
    cmd.output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bifurc(&["track", "--problem", "nope"], Some(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ex11"));
    assert_eq!(bifurc(&["track", "--problem", "ex11", "--bogus"], None).status.code(), Some(1));
    assert_eq!(bifurc(&["track", "--problem", "ex11", "--start", "1,x"], None).status.code(), Some(1));
    assert_eq!(bifurc(&["track", "--problem", "ex11", "--start", "1"], None).status.code(), Some(1));
    assert_eq!(bifurc(&["track", "--problem", "ex11", "--h", "0"], None).status.code(), Some(1));
    assert_eq!(bifurc(&["frobnicate"], None).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two() {
    // p0 = p_end leaves no interval to calibrate on.
    let dir = tempfile::tempdir().unwrap();
    let out = bifurc(&["track", "--problem", "ex11", "--p0", "1", "--pend", "1"], Some(dir.path()));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert!(report["failure"].is_string());
}

#[test]
fn track_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bifurc(&["track", "--problem", "ex11"], Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "path-0.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,p,lambda_min,residual,u_norm"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 5);
        let residual: f64 = cols[3].parse().unwrap();
        assert!(residual <= 1e-10, "{line}");
        // 17 significant digits in scientific notation.
        let mantissa = cols[1].trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{}", cols[1]);
    }
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["problem"], "ex11");
    assert!(report["failure"].is_null());
}

#[test]
fn full_state_adds_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bifurc(&["track", "--problem", "ex11", "--full-state"], Some(dir.path())).status.success());
    let csv = read(dir.path(), "path-0.csv");
    assert_eq!(csv.lines().next(), Some("index,p,lambda_min,residual,u_norm,u0,u1"));
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        assert!(bifurc(&["track", "--problem", "ilex", "--seed", "11"], Some(d)).status.success());
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(read(a.path(), &n), read(b.path(), &n), "{n}");
    }
}

#[test]
fn explicit_start_on_ex21_branches() {
    let dir = tempfile::tempdir().unwrap();
    let out = bifurc(&["track", "--problem", "ex21", "--start", "1,1"], Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let count = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("path-"))
        .count();
    assert_eq!(count, 4);
}

#[test]
fn traditional_tracker_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bifurc(&["track", "--problem", "ex11", "--tracker", "traditional", "--h", "-0.1"], Some(dir.path()));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["tracker"], "traditional");
    assert_eq!(report["branches"][0]["stop"], "stagnated");
}

#[test]
fn compare_prints_both_trackers() {
    let dir = tempfile::tempdir().unwrap();
    let out = bifurc(&["compare", "--problem", "ex11", "--h", "-0.2", "--h", "-0.1"], Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("adaptive") && text.contains("traditional"));
    let csv = read(dir.path(), "compare.csv");
    assert_eq!(csv.lines().filter(|l| l.starts_with("traditional")).count(), 2);
}

#[test]
fn gs_table_and_listing() {
    let out = bifurc(&["gs-table"], None);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for k in ["18", "100", "852", "6982", "54470"] {
        assert!(text.contains(k), "{text}");
    }
    let out = bifurc(&["list-problems"], None);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["ex11", "ilex", "ex21", "ex22", "ex23", "pde1d", "competition"] {
        assert!(text.contains(name));
    }
}

#[test]
fn pde_grid_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = bifurc(&["track", "--problem", "pde1d", "--grid-n", "40", "--pend", "17", "--branch-depth", "0"], Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["branches"][0]["points"][0]["u"].as_array().unwrap().len(), 39);
}

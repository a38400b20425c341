use std::path::Path;
use std::process::{Command, Output};

fn afw3d(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afw3d"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_tensor_passes_six_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = afw3d(&["verify", "tensor"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("verify_tensor.json"));
    assert_eq!(report["schema"], "afw3d-report/1");
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn converge_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = afw3d(&["converge", "--r", "0", "--levels", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|&h| h == "rate_total").unwrap();
    let rate: f64 = lines[3].split(',').nth(col).unwrap().parse().unwrap();
    assert!(rate >= 0.9, "{rate}");
    // Printed numbers come from the JSON report.
    let report = json(&dir.path().join("converge.json"));
    assert_eq!(report["report"]["rows"][2]["rate_total"].as_f64().unwrap(), rate_from_json(&report));
}

fn rate_from_json(report: &serde_json::Value) -> f64 {
    report["checks"][0]["value"].as_f64().unwrap()
}

#[test]
fn malformed_order_list_names_the_tet() {
    let dir = tempfile::tempdir().unwrap();
    let out = afw3d(&["solve", "--orders", "0,1,x,0,0,0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tet 2"), "{err}");
    let out = afw3d(&["solve", "--orders", "0,0,0,0,9,0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tet 4"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let out = afw3d(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(afw3d(&["converge", "--levels", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(afw3d(&["solve", "--mu", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(afw3d(&["solve", "--r", "9"], dir.path()).status.code(), Some(2));
    assert_eq!(afw3d(&["nonsense"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // A tolerance scale this small makes the round-off checks fail.
    let out = afw3d(&["verify", "spaces", "--tol-scale", "1e-6"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check failed"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# sweep defaults\nr = 1\nlambda = 5\nseed = 9\n").unwrap();
    let out = afw3d(&["solve", "--config", cfg.to_str().unwrap(), "--r", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("solve.json"));
    assert_eq!(report["config"]["policy"], "uniform:0");
    assert_eq!(report["config"]["lame_lambda"], 5.0);
    assert_eq!(report["config"]["seed"], 9);
}

#[test]
fn mesh_file_round_trip_keeps_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = afw3d(&["mesh", "gen", "--n", "1", "--orders", "1,0,1,0,1,0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mesh = dir.path().join("mesh.txt");
    let other = dir.path().join("second");
    let out = afw3d(&["solve", "--mesh", mesh.to_str().unwrap()], &other);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&other.join("solve.json"));
    assert_eq!(report["config"]["policy"], "file");
    let again = afw3d(&["mesh", "gen", "--mesh", mesh.to_str().unwrap()], &other);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(&mesh).unwrap(), std::fs::read(other.join("mesh.txt")).unwrap());
}

#[test]
fn identical_seed_gives_identical_reports() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for cmd in [&["infsup", "--orders", "random:0-1", "--seed", "5"][..], &["verify", "commute", "--orders", "random:0-2", "--seed", "3"][..]] {
        let (first, second) = (afw3d(cmd, a.path()), afw3d(cmd, b.path()));
        assert_eq!(first.status.code(), second.status.code());
        assert_eq!(first.stdout, second.stdout);
    }
    for name in ["infsup.csv", "infsup.json", "verify_commute.csv", "verify_commute.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

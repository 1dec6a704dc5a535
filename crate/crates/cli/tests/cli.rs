use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pataplectic")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_canonical_suite_passes_with_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--suite", "prop1", "--seed", "7", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["status"] == "pass"));
    assert_eq!(json["schema_version"], 1);
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["verify", "--suite", "lemma2,table,noether", "--seed", "42", "--out", path(d.path())]);
        assert_eq!(code(&out), 0);
    }
    let ja = fs::read(a.path().join("report.json")).unwrap();
    let jb = fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = path(dir.path());
    assert_eq!(code(&run(&["verify", "--suite", "", "--seed", "1", "--out", o])), 2);
    assert_eq!(code(&run(&["verify", "--suite", "nope", "--seed", "1", "--out", o])), 2);
    assert_eq!(code(&run(&["verify", "--suite", "prop1", "--out", o])), 2);
    assert_eq!(code(&run(&["verify", "--gauge", "sideways"])), 2);
    assert_eq!(code(&run(&["simulate", "--n", "3", "--out", o])), 2);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"seed": 1, "sed": 2}"#).unwrap();
    assert_eq!(code(&run(&["verify", "--config", path(&cfg), "--out", o])), 2);
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"seed": 5, "suites": ["nope"], "probes": 4}"#).unwrap();
    let out = run(&["verify", "--config", path(&cfg), "--suite", "prop1", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 5);
    // four (n, k) configurations of four probes each
    assert_eq!(json["rows"][0]["probes"], 16);
}

#[test]
fn maxwell_stated_constant_fails_honestly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["maxwell-check", "--n", "3", "--seed", "1", "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    let derived = rows.iter().find(|r| r["id"] == "maxwell_bracket.n3").unwrap();
    assert_eq!(derived["status"], "pass");
    let stated = rows.iter().find(|r| r["id"] == "maxwell_bracket.stated.n3").unwrap();
    assert_eq!(stated["status"], "fail");
    assert_eq!(stated["expected"], -4.0);
    // the report subcommand reproduces the status
    assert_eq!(code(&run(&["report", path(dir.path())])), 1);
}

#[test]
fn simulate_writes_solution_and_h0_adds_eps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--gauge", "h0", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let eps = header.iter().position(|c| *c == "eps").expect("eps column");
    let h = header.iter().position(|c| *c == "H").unwrap();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert!(cells[eps].parse::<f64>().is_ok());
        assert!(cells[h].parse::<f64>().unwrap().abs() < 1e-12);
    }
    assert_eq!(code(&run(&["report", path(&dir.path().join("report.json"))])), 0);
}

#[test]
fn simulate_constant_field_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        r#"{"simulation": {"system": "scalar_field", "params": {"potential": "0"}, "initial": {"kind": "constant", "value": 0.3},
            "tolerance": 1e-12, "checks": []}}"#,
    )
    .unwrap();
    let out = run(&["simulate", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn legendre_outside_region_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("leg.json");
    fs::write(&cfg, r#"{"seed": 3, "outside": true}"#).unwrap();
    let out = run(&["legendre-check", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL legendre.string.outside_region"));
    assert!(stdout.contains("singular"));
    let out = run(&["legendre-check", "--seed", "3", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
}

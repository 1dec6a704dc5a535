use super::*;
use crate::systems::ScalarFieldParams;

fn quick() -> SuiteOptions {
    SuiteOptions { seed: 11, probes: 6, ..Default::default() }
}

#[test]
fn report_json_round_trips_and_omits_wall_time() {
    let rows = run_suite("prop1", &quick()).unwrap();
    let report = Report::new("verify", 11, rows);
    let text = report.to_json().unwrap();
    assert!(text.ends_with('\n'));
    assert!(!text.contains("wall_ms"));
    let back = Report::from_json(&text).unwrap();
    assert_eq!(back.rows.len(), report.rows.len());
    assert_eq!(back.to_json().unwrap(), text);
}

#[test]
fn report_rejects_other_schema_versions() {
    let mut report = Report::new("verify", 0, vec![]);
    report.schema_version = 99;
    let text = serde_json::to_string(&report).unwrap();
    assert!(matches!(Report::from_json(&text), Err(VerifyError::Config(_))));
}

#[test]
fn suites_are_deterministic_in_the_seed() {
    let names: Vec<String> = ["lemma2", "table", "structural"].map(String::from).to_vec();
    let a = Report::new("verify", 11, run_suites(&names, &quick()).unwrap()).to_json().unwrap();
    let b = Report::new("verify", 11, run_suites(&names, &quick()).unwrap()).to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn canonical_relations_give_three_passing_rows() {
    let rows = run_suite("prop1", &quick()).unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["prop1.qq", "prop1.pq", "prop1.pp"]);
    assert!(rows.iter().all(Row::passed), "{}", Report::new("t", 0, rows.clone()).table());
}

#[test]
fn maxwell_constant_matches_derivation_not_stated_value() {
    let opts = SuiteOptions { n: Some(3), ..quick() };
    let rows = run_suite("maxwell_bracket", &opts).unwrap();
    let derived = rows.iter().find(|r| r.id == "maxwell_bracket.n3").unwrap();
    assert!(derived.passed());
    assert!((derived.value.unwrap() + 2.0).abs() < 1e-10);
    let stated = rows.iter().find(|r| r.id == "maxwell_bracket.stated.n3").unwrap();
    assert!(!stated.passed());
    assert_eq!(stated.expected, Some(-4.0));
}

#[test]
fn suite_selection_errors() {
    assert!(matches!(run_suites(&[], &quick()), Err(VerifyError::NoSuites)));
    let bad = vec!["lemma2".to_string(), "nope".to_string()];
    assert!(matches!(run_suites(&bad, &quick()), Err(VerifyError::UnknownSuite(s)) if s == "nope"));
}

#[test]
fn configs_honour_overrides() {
    let all = [(2, 1), (2, 2), (3, 1)];
    assert_eq!(SuiteOptions::default().configs(&all), all.to_vec());
    assert_eq!(SuiteOptions { n: Some(2), ..Default::default() }.configs(&all), vec![(2, 1), (2, 2)]);
    assert_eq!(SuiteOptions { n: Some(5), k: Some(3), ..Default::default() }.configs(&all), vec![(5, 3)]);
}

#[test]
fn outside_region_row_fails_with_singular_hessian() {
    let rows = run_suite("legendre", &SuiteOptions { outside: true, ..quick() }).unwrap();
    let out = rows.iter().find(|r| r.id == "legendre.string.outside_region").unwrap();
    assert!(!out.passed());
    assert!(out.note.as_deref().unwrap().contains("singular"));
    assert!(rows.iter().filter(|r| r.id != out.id).all(Row::passed));
}

#[test]
fn constant_field_is_an_exact_solution() {
    let cfg = SimulateConfig {
        system: ScalarFieldParams { potential: "0".into(), ..Default::default() },
        initial: Initial::Constant { value: 0.7 },
        checks: vec![],
        tolerance: 1e-12,
        ..Default::default()
    };
    let sim = simulate(&cfg).unwrap();
    for r in &sim.rows {
        assert!(r.passed(), "{r:?}");
        assert!(r.max_residual.unwrap() <= 1e-12);
    }
}

#[test]
fn h0_gauge_adds_an_eps_column() {
    let cfg = SimulateConfig { gauge: Gauge::H0, checks: vec![], ..Default::default() };
    let sim = simulate(&cfg).unwrap();
    let header = String::from_utf8(sim.csv).unwrap().lines().next().unwrap().to_string();
    assert!(header.split(',').any(|c| c.starts_with("eps")), "{header}");
    assert!(sim.rows.iter().any(|r| r.id == "simulate.h0_gauge" && r.passed()));
    let plain = simulate(&SimulateConfig { checks: vec![], ..Default::default() }).unwrap();
    let header = String::from_utf8(plain.csv).unwrap().lines().next().unwrap().to_string();
    assert!(!header.split(',').any(|c| c.starts_with("eps")));
}

#[test]
fn simulate_rejects_bad_configs() {
    let cfg = SimulateConfig { checks: vec!["bogus".into()], ..Default::default() };
    assert!(matches!(simulate(&cfg), Err(VerifyError::Config(_))));
    let cfg = SimulateConfig { system: ScalarFieldParams { n: 3, ..Default::default() }, ..Default::default() };
    assert!(matches!(simulate(&cfg), Err(VerifyError::Config(_))));
    let cfg: Result<SuiteOptions, _> = serde_json::from_str(r#"{"sed": 3}"#);
    assert!(cfg.is_err());
}

#[test]
fn csv_has_a_row_per_check() {
    let report = Report::new("verify", 1, run_suite("table", &quick()).unwrap());
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("schema_version,id,reference,status,max_residual,tolerance,probes,value,expected,wall_ms,note"));
    assert_eq!(text.lines().count(), report.rows.len() + 1);
}

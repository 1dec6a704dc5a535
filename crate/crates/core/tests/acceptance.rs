//! Acceptance criteria, one line per criterion.
//!
//! Run with `cargo test --test acceptance`. A criterion whose only failing rows are
//! documented deviations prints FAIL but does not fail the process; any other failure does.

use std::time::{Duration, Instant};

use pataplectic::verify::{run_suite, simulate, Report, Row, SimulateConfig, SuiteOptions};

const SEED: u64 = 20240613;

/// Rows that fail by design: the stated Maxwell constant is twice the derived one.
const DOCUMENTED: &[&str] = &["maxwell_bracket.stated."];

struct Outcome {
    rows: Vec<Row>,
    extra: Vec<(String, bool)>,
    elapsed: Duration,
}

fn suites(names: &[&str], opts: &SuiteOptions) -> Outcome {
    let start = Instant::now();
    let mut rows = vec![];
    for name in names {
        rows.extend(run_suite(name, opts).expect("known suite"));
    }
    Outcome { rows, extra: vec![], elapsed: start.elapsed() }
}

fn documented(row: &Row) -> bool {
    DOCUMENTED.iter().any(|p| row.id.starts_with(p))
}

/// Prints the criterion line; returns false on an undocumented failure.
fn report(index: usize, title: &str, out: &Outcome) -> bool {
    let failed: Vec<&Row> = out.rows.iter().filter(|r| !r.passed()).collect();
    let extra_failed: Vec<&str> = out.extra.iter().filter(|(_, ok)| !ok).map(|(m, _)| m.as_str()).collect();
    let pass = failed.is_empty() && extra_failed.is_empty();
    let worst = out.rows.iter().filter_map(|r| r.max_residual).fold(0.0, f64::max);
    println!(
        "{} criterion {index}: {title} ({} rows, worst residual {worst:.2e}, {:.2}s)",
        if pass { "PASS" } else { "FAIL" },
        out.rows.len(),
        out.elapsed.as_secs_f64()
    );
    for (msg, ok) in &out.extra {
        println!("    {} {msg}", if *ok { "ok  " } else { "FAIL" });
    }
    for r in &failed {
        println!("    FAIL {}: {}", r.id, r.note.as_deref().unwrap_or(""));
    }
    failed.iter().all(|r| documented(r)) && extra_failed.is_empty()
}

fn main() {
    let opts = SuiteOptions { seed: SEED, ..Default::default() };
    let mut ok = true;

    let mut c1 = suites(&["lemma2", "lemma3", "prop1", "prop2", "table"], &opts);
    c1.extra.push((format!("runtime {:.2}s < 60s", c1.elapsed.as_secs_f64()), c1.elapsed < Duration::from_secs(60)));
    ok &= report(1, "bracket algebra to 1e-9 at 30 probes, n in {2,3}, k in {1,2}", &c1);

    ok &= report(2, "canonical recovery on the slice, order 2 +- 0.3", &suites(&["canonical"], &opts));
    ok &= report(3, "Stokes identities on integrated solutions, order 2 +- 0.3", &suites(&["stokes"], &opts));
    ok &= report(4, "Legendre round trips, Newton vs grid, envelope gradients", &suites(&["legendre"], &opts));

    let dynamics = suites(&["dynamics"], &opts);
    let mut c5 = Outcome { rows: dynamics.rows.clone(), extra: vec![], elapsed: dynamics.elapsed };
    c5.rows.retain(|r| ["dynamics.l2_order", "dynamics.energy_drift", "dynamics.oscillator"].contains(&r.id.as_str()));
    let start = Instant::now();
    let fine = simulate(&SimulateConfig { mesh: 256, checks: vec![], ..Default::default() }).expect("mesh 256 run");
    let t = start.elapsed();
    c5.rows.extend(fine.rows);
    c5.extra.push((format!("finest-mesh run {:.2}s < 30s", t.as_secs_f64()), t < Duration::from_secs(30)));
    ok &= report(5, "standing-wave order, slice energy drift over 1000 periods", &c5);

    let mut c6 = dynamics;
    c6.rows.retain(|r| r.id.contains("stress") || r.id.contains("hamiltonian_tensor") || r.id.contains("explicit_x"));
    ok &= report(6, "stress-energy balance at order 2 and Hamiltonian tensor match", &c6);

    let mut c7 = suites(&["maxwell_bracket", "maxwell_gauge", "maxwell_manufactured"], &opts);
    for r in c7.rows.iter().filter(|r| r.id.starts_with("maxwell_bracket.n")) {
        c7.extra.push((format!("{}: computed {:+} (derived {:+})", r.id, r.value.unwrap_or(f64::NAN), r.expected.unwrap_or(f64::NAN)), r.passed()));
    }
    ok &= report(7, "Maxwell {pi,A} = 2(-1)^n(n-1), gauge brackets, manufactured solutions", &c7);

    let mut c8 = suites(&["structural", "admissible", "noether"], &opts);
    let all: Vec<&str> = pataplectic::verify::DEFAULT_SUITES.to_vec();
    let json = || Report::new("verify", SEED, suites(&all, &opts).rows).to_json().expect("json");
    c8.extra.push(("byte-identical report on re-run".into(), json() == json()));
    ok &= report(8, "structural invariants green and reports reproducible", &c8);

    if !ok {
        println!("undocumented acceptance failures");
        std::process::exit(1);
    }
}

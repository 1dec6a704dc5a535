//! Verification suites and the machine-readable report they produce.
//!
//! Every suite is a pure function of its options; randomized data is drawn from
//! a seed derived from the master seed and the suite name.

use std::error::Error;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Gauge;
use crate::exterior::{Form, MultiIndex};
use crate::expr::{parse, Expr};
use crate::phase::PhaseSpace;
use crate::probe;

mod algebra;
mod correspondence;
mod simulation;

pub use algebra::pi_a_constant;
pub use correspondence::quartic_grid_oracle;
pub use simulation::{simulate, Initial, SimulateConfig, Simulation};

pub const SCHEMA_VERSION: u32 = 1;

/// Probe points per identity and configuration.
pub const PROBES: usize = 30;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite `{0}` (known: {known})", known = SUITES.join(", "))]
    UnknownSuite(String),
    #[error("no suites selected")]
    NoSuites,
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One check. `max_residual` is absent for lower-bound checks and for checks that errored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    pub reference: String,
    pub status: Status,
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub probes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip)]
    pub wall_ms: f64,
}

type Outcome = Result<f64, Box<dyn Error>>;

impl Row {
    /// Passes when the residual is at most `tol`.
    pub fn residual(id: impl Into<String>, reference: &str, tol: f64, probes: usize, f: impl FnOnce() -> Outcome) -> Row {
        let start = Instant::now();
        let out = f();
        let mut row = Row::blank(id.into(), reference, tol, probes);
        match out {
            Ok(r) if r.is_finite() => {
                row.max_residual = Some(r);
                row.status = if r <= tol { Status::Pass } else { Status::Fail };
            }
            Ok(r) => row.note = Some(format!("non-finite residual {r}")),
            Err(e) => row.note = Some(e.to_string()),
        }
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        row
    }

    /// Compares a computed value with an expected one.
    pub fn value(id: impl Into<String>, reference: &str, expected: f64, tol: f64, probes: usize, f: impl FnOnce() -> Outcome) -> Row {
        let mut row = Row::residual(id, reference, tol, probes, || {
            let v = f()?;
            Ok(v)
        });
        if let Some(v) = row.max_residual {
            let r = (v - expected).abs();
            row.value = Some(v);
            row.max_residual = Some(r);
            row.status = if r <= tol { Status::Pass } else { Status::Fail };
        }
        row.expected = Some(expected);
        row
    }

    /// Passes when the measured quantity is at least `bound`; used to confirm that a
    /// defect is detected.
    pub fn at_least(id: impl Into<String>, reference: &str, bound: f64, probes: usize, f: impl FnOnce() -> Outcome) -> Row {
        let mut row = Row::residual(id, reference, bound, probes, f);
        if let Some(v) = row.max_residual.take() {
            row.value = Some(v);
            row.status = if v >= bound { Status::Pass } else { Status::Fail };
        }
        row.expected = Some(bound);
        row
    }

    /// A check expected to error out; passes only when it does, with the error text.
    pub fn expect_error(id: impl Into<String>, reference: &str, probes: usize, f: impl FnOnce() -> Result<(), Box<dyn Error>>) -> Row {
        let start = Instant::now();
        let mut row = Row::blank(id.into(), reference, 0.0, probes);
        match f() {
            Ok(()) => row.note = Some("expected an error, got none".into()),
            Err(e) => {
                row.note = Some(e.to_string());
                row.status = Status::Pass;
            }
        }
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        row
    }

    fn blank(id: String, reference: &str, tol: f64, probes: usize) -> Row {
        Row {
            id,
            reference: reference.to_string(),
            status: Status::Fail,
            max_residual: None,
            tolerance: tol,
            probes,
            value: None,
            expected: None,
            note: None,
            wall_ms: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

const CSV_HEADER: [&str; 11] =
    ["schema_version", "id", "reference", "status", "max_residual", "tolerance", "probes", "value", "expected", "wall_ms", "note"];

impl Report {
    pub fn new(command: &str, seed: u64, rows: Vec<Row>) -> Report {
        let passed = rows.iter().filter(|r| r.passed()).count();
        let summary = Summary { total: rows.len(), passed, failed: rows.len() - passed, all_pass: passed == rows.len() };
        Report { schema_version: SCHEMA_VERSION, command: command.to_string(), seed, rows, summary }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.all_pass
    }

    /// Pretty JSON with a trailing newline. Wall times are not part of it.
    pub fn to_json(&self) -> Result<String, VerifyError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Report, VerifyError> {
        let r: Report = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(VerifyError::Config(format!("report schema {} is not {SCHEMA_VERSION}", r.schema_version)));
        }
        Ok(r)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), VerifyError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                r.id.clone(),
                r.reference.clone(),
                if r.passed() { "pass" } else { "fail" }.to_string(),
                num(r.max_residual),
                format!("{:e}", r.tolerance),
                r.probes.to_string(),
                num(r.value),
                num(r.expected),
                format!("{:.3}", r.wall_ms),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One line per row, for terminals.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let res = match (r.max_residual, r.value) {
                (Some(x), _) => format!("residual {x:.3e} (tol {:.1e})", r.tolerance),
                (None, Some(v)) => format!("value {v:.3e} (bound {:.1e})", r.expected.unwrap_or(0.0)),
                _ => String::new(),
            };
            let note = r.note.as_deref().map(|n| format!(" [{n}]")).unwrap_or_default();
            s.push_str(&format!("{:4} {:40} {}{}\n", if r.passed() { "ok" } else { "FAIL" }, r.id, res, note));
        }
        s.push_str(&format!("{} of {} checks passed\n", self.summary.passed, self.summary.total));
        s
    }
}

/// Options shared by the suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Restricts the base dimension where a suite sweeps several.
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub probes: usize,
    /// Evaluates the string Legendre map at a point outside the invertible region.
    pub outside: bool,
    pub mesh: usize,
    pub gauge: Gauge,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 0, n: None, k: None, probes: PROBES, outside: false, mesh: 64, gauge: Gauge::None }
    }
}

impl SuiteOptions {
    pub fn seed_for(&self, name: &str) -> u64 {
        probe::derive_seed(self.seed, name)
    }

    /// The `(n, k)` sweep, filtered by the `n` and `k` overrides.
    pub fn configs(&self, all: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let picked: Vec<_> = all.iter().copied().filter(|(n, k)| self.n.is_none_or(|m| m == *n) && self.k.is_none_or(|m| m == *k)).collect();
        if picked.is_empty() {
            // an override outside the default sweep runs that configuration alone
            vec![(self.n.unwrap_or(all[0].0), self.k.unwrap_or(all[0].1))]
        } else {
            picked
        }
    }
}

pub const SUITES: [&str; 16] = [
    "lemma2",
    "lemma3",
    "prop1",
    "prop2",
    "table",
    "admissible",
    "noether",
    "eq16",
    "structural",
    "maxwell_bracket",
    "maxwell_gauge",
    "maxwell_manufactured",
    "legendre",
    "dynamics",
    "canonical",
    "stokes",
];

/// Suites run by `verify` when none are named.
pub const DEFAULT_SUITES: [&str; 10] =
    ["lemma2", "lemma3", "prop1", "prop2", "table", "admissible", "noether", "eq16", "structural", "maxwell_bracket"];

pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<Vec<Row>, VerifyError> {
    let o = SuiteOptions { seed: opts.seed_for(name), ..opts.clone() };
    Ok(match name {
        "lemma2" => algebra::lemma2(&o),
        "lemma3" => algebra::lemma3(&o),
        "prop1" => algebra::prop1(&o),
        "prop2" => algebra::prop2(&o),
        "table" => algebra::table(&o),
        "admissible" => algebra::admissible(&o),
        "noether" => algebra::noether(&o),
        "eq16" => algebra::eq16(&o),
        "structural" => algebra::structural(&o),
        "maxwell_bracket" => algebra::maxwell_bracket(&o),
        "maxwell_gauge" => algebra::maxwell_gauge(&o),
        "maxwell_manufactured" => algebra::maxwell_manufactured(&o),
        "legendre" => correspondence::legendre(&o),
        "dynamics" => simulation::dynamics(&o),
        "canonical" => simulation::canonical(&o),
        "stokes" => simulation::stokes(&o),
        other => return Err(VerifyError::UnknownSuite(other.to_string())),
    })
}

/// Runs the named suites in order. Unknown names fail before anything runs.
pub fn run_suites(names: &[String], opts: &SuiteOptions) -> Result<Vec<Row>, VerifyError> {
    if names.is_empty() {
        return Err(VerifyError::NoSuites);
    }
    if let Some(bad) = names.iter().find(|n| !SUITES.contains(&n.as_str())) {
        return Err(VerifyError::UnknownSuite(bad.clone()));
    }
    let mut rows = Vec::new();
    for name in names {
        log::info!("suite {name}");
        rows.extend(run_suite(name, opts)?);
    }
    Ok(rows)
}

/// Seeded random coefficients in the base and fiber coordinates of a space.
pub(crate) struct Draw {
    rng: ChaCha8Rng,
}

impl Draw {
    pub fn new(seed: u64) -> Draw {
        Draw { rng: probe::rng(seed) }
    }

    fn c(&mut self) -> String {
        format!("{:.3}", self.rng.gen_range(0.5..1.5))
    }

    fn pick<'a>(&mut self, names: &'a [String]) -> &'a str {
        &names[self.rng.gen_range(0..names.len())]
    }

    /// A random function of `(x, y)`.
    pub fn coefficient(&mut self, sp: &PhaseSpace) -> Expr {
        let names = sp.chart().names();
        let (xs, ys) = (&names[..sp.n()], &names[sp.n()..sp.q_dim()]);
        let c = self.c();
        let x = self.pick(xs).to_string();
        let y = self.pick(ys).to_string();
        let y2 = self.pick(ys).to_string();
        let text = match self.rng.gen_range(0..6) {
            0 => format!("{c}*{x}*{y}"),
            1 => format!("{c}*sin({y})"),
            2 => format!("{c}+{x}^2"),
            3 => format!("{c}*{y}*{y2}"),
            4 => format!("{c}*cos({x})*{y}"),
            _ => format!("{c}*{x}"),
        };
        parse(&text, sp.chart()).expect("generated text parses")
    }

    /// A random function of `x` alone.
    pub fn base_coefficient(&mut self, sp: &PhaseSpace) -> Expr {
        let names = sp.chart().names();
        let c = self.c();
        let x = self.pick(&names[..sp.n()]).to_string();
        let text = match self.rng.gen_range(0..3) {
            0 => format!("{c}+{x}"),
            1 => format!("{c}*cos({x})"),
            _ => format!("{c}+{x}^2"),
        };
        parse(&text, sp.chart()).expect("generated text parses")
    }

    /// A random `(n-1)`-form on `X × Y`.
    pub fn zeta(&mut self, sp: &PhaseSpace) -> Form {
        let mut z = Form::zero(sp.chart(), sp.n() - 1);
        for set in MultiIndex::subsets(sp.q_dim(), sp.n() - 1) {
            z.add_term(&set.to_vec(), self.coefficient(sp));
        }
        z
    }

    /// A random `(n-1)`-form in the bracket algebra of `sp`: on Weyl charts at most one
    /// fiber differential, with an `x`-only coefficient.
    pub fn admissible_zeta(&mut self, sp: &PhaseSpace) -> Form {
        if sp.kind() == crate::phase::PhaseKind::Full {
            return self.zeta(sp);
        }
        let mut z = Form::zero(sp.chart(), sp.n() - 1);
        for set in MultiIndex::subsets(sp.q_dim(), sp.n() - 1) {
            let idx = set.to_vec();
            match idx.iter().filter(|&&c| c >= sp.n()).count() {
                0 => z.add_term(&idx, self.coefficient(sp)),
                1 => z.add_term(&idx, self.base_coefficient(sp)),
                _ => {}
            }
        }
        z
    }

    /// A random vector field on `X × Y`.
    pub fn field(&mut self, sp: &PhaseSpace) -> Vec<Expr> {
        (0..sp.q_dim()).map(|_| self.coefficient(sp)).collect()
    }

    /// A random field whose generalized momentum lies in the bracket algebra of `sp`:
    /// on Weyl charts the base components may only depend on `x`.
    pub fn admissible_field(&mut self, sp: &PhaseSpace) -> Vec<Expr> {
        if sp.kind() == crate::phase::PhaseKind::Full {
            return self.field(sp);
        }
        (0..sp.q_dim()).map(|c| if c < sp.n() { self.base_coefficient(sp) } else { self.coefficient(sp) }).collect()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}

#[cfg(test)]
mod tests;

//! Suites on integrated Klein-Gordon solutions, and the `simulate` driver.

use std::error::Error;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Row, SuiteOptions, VerifyError};
use crate::brackets::observables;
use crate::dynamics::{convergence_orders, integrate_mechanics, FieldSolution, Gauge, Grid, Region, Slice, StandingWave, WeylIntegrator};
use crate::expr::{parse, Expr};
use crate::exterior::Form;
use crate::systems::{scalar_field_system, ScalarField, ScalarFieldParams};

type R<T> = Result<T, Box<dyn Error>>;

const MESHES: [usize; 3] = [64, 128, 256];
const ORDER_TOL: f64 = 0.3;

fn kg() -> R<ScalarField> {
    Ok(scalar_field_system(&ScalarFieldParams::default())?)
}

fn wave() -> StandingWave {
    StandingWave::new(0.5, 2.0, 1.0, 1.0, -1.0)
}

fn grid(nx: usize) -> Grid {
    Grid::with_ratio(nx, 2.0 * PI, 0.5, PI / 2.0)
}

fn solutions(field: &ScalarField, gauge: Gauge) -> R<Vec<FieldSolution>> {
    let w = WeylIntegrator::new(field)?;
    MESHES.iter().map(|&nx| Ok(w.integrate(&wave().initial(&grid(nx)), &grid(nx), gauge)?)).collect()
}

/// Order row: the measured order farthest from 2, with the raw errors in the note.
fn order_row(id: &str, reference: &str, errors: R<Vec<f64>>) -> Row {
    let errors = errors.map_err(|e| e.to_string());
    let mut row = Row::value(id, reference, 2.0, ORDER_TOL, MESHES.len(), || {
        let e = errors.as_ref().map_err(|e| e.clone())?;
        Ok(convergence_orders(e).into_iter().fold(2.0, |w, o| if (o - 2.0).abs() > (w - 2.0f64).abs() { o } else { w }))
    });
    if let Ok(e) = &errors {
        let list: Vec<String> = e.iter().map(|v| format!("{v:.3e}")).collect();
        row.note = Some(format!("errors {}", list.join(" ")));
    }
    row
}

pub fn dynamics(o: &SuiteOptions) -> Vec<Row> {
    let mut rows = vec![];
    let run = || -> R<(ScalarField, Vec<FieldSolution>)> {
        let field = kg()?;
        let sols = solutions(&field, Gauge::None)?;
        Ok((field, sols))
    };
    let data = run().map_err(|e| e.to_string());
    let with = |f: &dyn Fn(&WeylIntegrator, &[FieldSolution]) -> R<Vec<f64>>| -> R<Vec<f64>> {
        let (field, sols) = data.as_ref().map_err(|e| e.clone())?;
        let w = WeylIntegrator::new(field)?;
        f(&w, sols)
    };
    rows.push(order_row("dynamics.l2_order", "standing wave L2 error vs A cos(ωt) cos(κx), ω² = κ² + m²", with(&|w, sols| {
        Ok(sols.iter().map(|s| w.l2_error(s, s.grid.steps, 0, |t, x| wave().y(t, x))).collect())
    })));
    rows.push(order_row("dynamics.hamilton_second_order", "Σ ∂p^α/∂x^α + ∂H/∂y with centered differences", with(&|w, sols| {
        sols.iter().map(|s| Ok(w.hamilton_residual(s)?.second)).collect()
    })));
    let first = with(&|w, sols| sols.iter().map(|s| Ok(w.hamilton_residual(s)?.first)).collect()).map_err(|e| e.to_string());
    rows.push(Row::residual("dynamics.hamilton_first", "∂y/∂x^α - ∂H/∂p^α on the stencil", 1e-12, MESHES.len(), || {
        Ok(first.clone()?.into_iter().fold(0.0, f64::max))
    }));
    for b in 0..2 {
        rows.push(order_row(&format!("dynamics.stress_order.{b}"), "Σ_α ∂S^α_β/∂x^α - ∂L/∂x^β", with(&|w, sols| {
            sols.iter().map(|s| Ok(w.stress_divergence(s)?.residual[b])).collect()
        })));
        rows.push(order_row(&format!("dynamics.hamiltonian_tensor_order.{b}"), "Σ_α ∂H^α_β/∂x^α + ∂H/∂x^β on the graph", with(&|w, sols| {
            sols.iter().map(|s| Ok(w.stress_divergence(s)?.tensor_residual[b])).collect()
        })));
    }
    let matches = with(&|w, sols| sols.iter().map(|s| Ok(w.stress_divergence(s)?.tensor_match)).collect()).map_err(|e| e.to_string());
    rows.push(Row::residual("dynamics.hamiltonian_tensor_match", "H^α_β = -S^α_β at every node", 1e-12, MESHES.len(), || {
        Ok(matches.clone()?.into_iter().fold(0.0, f64::max))
    }));
    rows.push(Row::at_least("dynamics.explicit_x_dependence", "∂L/∂x ≠ 0 is seen by the divergence when V depends on x", 0.01, 1, || {
        let p = ScalarFieldParams { potential: "0.5*(1+0.9*cos(x2))*y1^2".into(), ..Default::default() };
        let field = scalar_field_system(&p)?;
        let w = WeylIntegrator::new(&field)?;
        let s = w.stress_divergence(&w.integrate(&wave().initial(&grid(128)), &grid(128), Gauge::None)?)?;
        if s.residual[1] > 0.1 * s.divergence[1] {
            return Err(format!("balance off: {:e} vs {:e}", s.residual[1], s.divergence[1]).into());
        }
        Ok(s.divergence[1])
    }));
    rows.push(Row::residual("dynamics.energy_drift", "staggered slice energy, relative drift over 1000 periods", 1e-6, 1, || {
        let field = kg()?;
        let w = WeylIntegrator::new(&field)?;
        let g = Grid::with_ratio(128, 2.0 * PI, 0.5, 1000.0 * wave().period());
        let hist = w.energy_history(&wave().initial(&g), &g, 1000)?;
        let e0 = hist[0].1;
        Ok(hist.iter().map(|(_, e)| ((e - e0) / e0).abs()).fold(0.0, f64::max))
    }));
    rows.push(Row::residual("dynamics.oscillator", "n = 1 energy drift of the symplectic step over 10 time units", 1e-6, 1, || {
        let p = ScalarFieldParams { n: 1, metric: Some(vec![vec!["1".into()]]), ..Default::default() };
        let field = scalar_field_system(&p)?;
        Ok(integrate_mechanics(&field, &[1.0], &[0.0], 1e-3, 10_000)?.relative_drift())
    }));
    let _ = o;
    rows
}

fn test_functions(field: &ScalarField) -> R<([Expr; 2], Expr)> {
    let c = field.space().chart();
    Ok(([parse("cos(x1)*(1+cos(2*x2))", c)?, parse("0.3*sin(x2)", c)?], parse("(1+x1)*(1+0.5*cos(2*x2))", c)?))
}

pub fn canonical(o: &SuiteOptions) -> Vec<Row> {
    let run = || -> R<Vec<crate::dynamics::SliceBrackets>> {
        let field = kg()?;
        let w = WeylIntegrator::new(&field)?;
        let (f, g) = test_functions(&field)?;
        solutions(&field, Gauge::None)?.iter().map(|s| Ok(w.slice_brackets(s, s.grid.steps / 2, 0, &f, &g)?)).collect()
    };
    let data = run().map_err(|e| e.to_string());
    let get = || data.clone().map_err(Into::<Box<dyn Error>>::into);
    let t = PI / 4.0;
    // ∫ f⁰ g dx on the slice, integrated by hand
    let exact = t.cos() * (1.0 + t) * 2.0 * PI * 1.25;
    let _ = o;
    vec![
        Row::residual("canonical.pq", "∫_S {P_g, Q^f} = ∫_S f⁰ g ω₀", 1e-10, MESHES.len(), || {
            Ok(get()?.iter().map(|b| (b.pq - exact).abs().max((b.target - exact).abs())).fold(0.0, f64::max))
        }),
        Row::residual("canonical.qq_pp", "∫_S {Q,Q} = ∫_S {P,P} = 0", 1e-12, MESHES.len(), || {
            Ok(get()?.iter().map(|b| b.qq.abs().max(b.pp.abs())).fold(0.0, f64::max))
        }),
        order_row("canonical.dq_dt_order", "d/dt ∫_S Q = ∫_S {Q, η₀}", get().map(|v| v.iter().map(|b| (b.dq_dt - b.eta_q).abs()).collect())),
        order_row("canonical.dp_dt_order", "d/dt ∫_S P = ∫_S {P, η₀}", get().map(|v| v.iter().map(|b| (b.dp_dt - b.eta_p).abs()).collect())),
    ]
}

pub fn stokes(o: &SuiteOptions) -> Vec<Row> {
    let _ = o;
    let field = match kg() {
        Ok(f) => f,
        Err(e) => return vec![Row::residual("stokes.setup", "Klein-Gordon system", 0.0, 0, || Err(e))],
    };
    let sp = field.space();
    let c = sp.chart();
    let sols = solutions(&field, Gauge::None).map_err(|e| e.to_string());
    let w = WeylIntegrator::new(&field);
    let each = |f: &dyn Fn(&WeylIntegrator, &FieldSolution) -> R<f64>| -> R<Vec<f64>> {
        let w = w.as_ref().map_err(|e| e.to_string())?;
        sols.as_ref().map_err(|e| e.clone())?.iter().map(|s| f(w, s)).collect()
    };
    let region = |s: &FieldSolution| Region { t0: s.grid.steps / 4, t1: 3 * s.grid.steps / 4, x0: 0, x1: s.grid.nx };
    let mut rows = vec![];
    let forms: R<[(Form, &str); 2]> = (|| {
        Ok([
            (observables::position(sp, 0, &[parse("1+0.5*cos(2*x2)", c)?, Expr::zero()]), "q"),
            (observables::momentum(sp, sp.y(0), &parse("1+0.5*cos(2*x2)+0.2*sin(x2)", c)?), "p"),
        ])
    })();
    match forms {
        Ok(forms) => {
            for (a, name) in forms {
                rows.push(order_row(&format!("stokes.{name}_order"), "∫_D {Hω, a} = ∫_∂D a", each(&|w, s| {
                    let (lhs, rhs) = w.stokes_check(s, &a, &region(s))?;
                    Ok((lhs - rhs).abs())
                })));
                let graph = each(&|w, s| Ok(w.graph_residual(s, &a)?)).map_err(|e| e.to_string());
                if name == "q" {
                    rows.push(Row::residual("stokes.graph_q", "da = {Hω, a} on the graph, a = Q", 1e-12, MESHES.len(), || {
                        Ok(graph.clone()?.into_iter().fold(0.0, f64::max))
                    }));
                } else {
                    rows.push(order_row("stokes.graph_p_order", "da = {Hω, a} on the graph, a = P", graph.map_err(Into::into)));
                }
            }
        }
        Err(e) => rows.push(Row::residual("stokes.setup", "observables", 0.0, 0, || Err(e))),
    }
    let zero_form = parse("(1+0.5*cos(x2))*y1", c).map(|e| Form::scalar(c, e));
    rows.push(order_row("stokes.zero_form_order", "∫_γ {Hω, a} = a(end) - a(start) for an admissible 0-form", (|| {
        let a = zero_form.clone()?;
        each(&|w, s| {
            let (lhs, rhs) = w.line_check(s, &a, s.grid.nx / 16, s.grid.steps / 4, 3 * s.grid.steps / 4)?;
            Ok((lhs - rhs).abs())
        })
    })()));
    rows
}

/// Initial slice for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    StandingWave { amp: f64, kappa: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: ScalarFieldParams,
    pub mesh: usize,
    pub gauge: Gauge,
    pub length: f64,
    /// `h_t / h_x`.
    pub ratio: f64,
    pub t_end: f64,
    pub initial: Initial,
    /// Bound on the per-node Hamilton residuals of the run.
    pub tolerance: f64,
    /// Any of `convergence`, `stokes`, `slice`.
    pub checks: Vec<String>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            system: ScalarFieldParams::default(),
            mesh: 64,
            gauge: Gauge::None,
            length: 2.0 * PI,
            ratio: 0.5,
            t_end: PI / 2.0,
            initial: Initial::StandingWave { amp: 0.5, kappa: 2.0 },
            tolerance: 5e-2,
            checks: vec!["convergence".into()],
        }
    }
}

pub struct Simulation {
    pub rows: Vec<Row>,
    /// The solution table at the requested mesh.
    pub csv: Vec<u8>,
}

/// `½ m²` when `V(y) = ½ m² y²` on the probe values, else `None`.
fn quadratic_mass(field: &ScalarField) -> Option<f64> {
    let sp = field.space();
    let at = |y: f64| {
        let mut pt = vec![0.3; sp.dim()];
        pt[sp.y(0)] = y;
        field.potential.eval(&pt).ok()
    };
    let half_m2 = at(1.0)?;
    [0.5, -1.5, 2.0].iter().all(|&y| at(y).is_some_and(|v| (v - half_m2 * y * y).abs() < 1e-12)).then_some(2.0 * half_m2)
}

fn initial_slice(init: &Initial, grid: &Grid, k: usize, g: (f64, f64), mass2: f64) -> Slice {
    let one = match *init {
        Initial::StandingWave { amp, kappa } => StandingWave::new(amp, kappa, mass2, g.0, g.1).initial(grid),
        Initial::Constant { value } => Slice { y: vec![value; grid.nx], p0: vec![0.0; grid.nx] },
    };
    Slice { y: one.y.repeat(k), p0: one.p0.repeat(k) }
}

pub fn simulate(cfg: &SimulateConfig) -> Result<Simulation, VerifyError> {
    let bad = |e: &dyn std::fmt::Display| VerifyError::Config(e.to_string());
    if cfg.system.n != 2 {
        return Err(VerifyError::Config("simulate needs a scalar field with n = 2".into()));
    }
    if let Some(c) = cfg.checks.iter().find(|c| !["convergence", "stokes", "slice"].contains(&c.as_str())) {
        return Err(VerifyError::Config(format!("unknown check `{c}`")));
    }
    let field = scalar_field_system(&cfg.system).map_err(|e| bad(&e))?;
    let w = WeylIntegrator::new(&field).map_err(|e| bad(&e))?;
    let mass2 = quadratic_mass(&field);
    let g = w.metric();
    let grid_at = |nx: usize| Grid::with_ratio(nx, cfg.length, cfg.ratio, cfg.t_end);
    let k = cfg.system.k;
    let solve = |nx: usize| -> R<FieldSolution> {
        let grid = grid_at(nx);
        Ok(w.integrate(&initial_slice(&cfg.initial, &grid, k, g, mass2.unwrap_or(0.0)), &grid, cfg.gauge)?)
    };
    // CFL and Legendre failures are errors of the run, not failed checks
    let sol = solve(cfg.mesh).map_err(|e| bad(&e))?;
    let mut csv = Vec::new();
    w.write_csv(&sol, &mut csv).map_err(|e| bad(&e))?;

    let mut rows = vec![];
    let res = w.hamilton_residual(&sol).map_err(|e| bad(&e))?;
    rows.push(Row::residual("simulate.hamilton_residual", "per-node Hamilton equation residuals", cfg.tolerance, sol.levels() * cfg.mesh, || {
        Ok(res.first.max(res.second).max(res.jacobian))
    }));
    let stress = w.stress_divergence(&sol).map_err(|e| bad(&e))?;
    rows.push(Row::residual("simulate.stress_divergence", "Σ_α ∂S^α_β/∂x^α - ∂L/∂x^β", cfg.tolerance, sol.levels() * cfg.mesh, || {
        Ok(stress.residual[0].max(stress.residual[1]))
    }));
    rows.push(Row::residual("simulate.energy_drift", "staggered slice energy drift, relative to max(|E₀|, 1)", 1e-6, sol.levels(), || {
        let hist = w.energy_history(&initial_slice(&cfg.initial, &sol.grid, k, g, mass2.unwrap_or(0.0)), &sol.grid, 1)?;
        let e0 = hist.first().map_or(0.0, |h| h.1);
        Ok(hist.iter().map(|(_, e)| (e - e0).abs() / e0.abs().max(1.0)).fold(0.0, f64::max))
    }));
    if cfg.gauge == Gauge::H0 {
        rows.push(Row::residual("simulate.h0_gauge", "H = 0 at every node", 1e-12, sol.levels() * cfg.mesh, || {
            let mut worst: f64 = 0.0;
            for lvl in 0..sol.levels() {
                for j in 0..cfg.mesh {
                    worst = worst.max(field.system.hamiltonian.eval(&w.node_point(&sol, lvl, j))?.abs());
                }
            }
            Ok(worst)
        }));
    }
    let meshes = [cfg.mesh, 2 * cfg.mesh, 4 * cfg.mesh];
    let exact = match (&cfg.initial, mass2) {
        (Initial::StandingWave { amp, kappa }, Some(m2)) if k == 1 => Some(StandingWave::new(*amp, *kappa, m2, g.0, g.1)),
        _ => None,
    };
    if cfg.checks.iter().any(|c| c == "convergence") {
        match &exact {
            Some(wv) => {
                let errors: R<Vec<f64>> = meshes.iter().map(|&nx| solve(nx).map(|s| w.l2_error(&s, s.grid.steps, 0, |t, x| wv.y(t, x)))).collect();
                rows.push(order_row("simulate.l2_order", "L2 error vs the standing wave", errors));
            }
            None => log::warn!("no closed-form solution for this configuration; skipping the L2 order"),
        }
        let errors: R<Vec<f64>> = meshes.iter().map(|&nx| Ok(w.hamilton_residual(&solve(nx)?)?.second)).collect();
        rows.push(order_row("simulate.hamilton_second_order", "second Hamilton equation residual", errors));
    }
    if cfg.checks.iter().any(|c| c == "stokes") {
        let sp = field.space();
        let a = observables::momentum(sp, sp.y(0), &parse("1+0.5*cos(2*x2)+0.2*sin(x2)", sp.chart()).map_err(|e| bad(&e))?);
        let errors: R<Vec<f64>> = meshes
            .iter()
            .map(|&nx| {
                let s = solve(nx)?;
                let (lhs, rhs) = w.stokes_check(&s, &a, &Region { t0: s.grid.steps / 4, t1: 3 * s.grid.steps / 4, x0: 0, x1: nx })?;
                Ok((lhs - rhs).abs())
            })
            .collect();
        rows.push(order_row("simulate.stokes_p_order", "∫_D {Hω, P} = ∫_∂D P", errors));
    }
    if cfg.checks.iter().any(|c| c == "slice") {
        let (f, gg) = test_functions(&field).map_err(|e| bad(&e))?;
        let lvl = sol.grid.steps / 2;
        let b = w.slice_brackets(&sol, lvl, 0, &f, &gg).map_err(|e| bad(&e))?;
        rows.push(Row::residual("simulate.slice_pq", "∫_S {P_g, Q^f} = ∫_S f⁰ g ω₀", 1e-10, cfg.mesh, || Ok((b.pq - b.target).abs())));
        rows.push(Row::residual("simulate.slice_eta", "d/dt ∫_S Q, P against {·, η₀}", cfg.tolerance, cfg.mesh, || {
            Ok((b.dq_dt - b.eta_q).abs().max((b.dp_dt - b.eta_p).abs()))
        }));
    }
    Ok(Simulation { rows, csv })
}

use super::*;
use crate::expr::parse;
use crate::systems::{scalar_field_system, ScalarFieldParams};
use std::f64::consts::PI;

fn kg() -> ScalarField {
    scalar_field_system(&ScalarFieldParams::default()).unwrap()
}

fn wave() -> StandingWave {
    StandingWave::new(0.5, 2.0, 1.0, 1.0, -1.0)
}

fn solve(field: &ScalarField, nx: usize, gauge: Gauge) -> FieldSolution {
    let w = WeylIntegrator::new(field).unwrap();
    let grid = Grid::with_ratio(nx, 2.0 * PI, 0.5, PI / 2.0);
    w.integrate(&wave().initial(&grid), &grid, gauge).unwrap()
}

fn assert_order(errors: &[f64], what: &str) {
    for o in convergence_orders(errors) {
        assert!((o - 2.0).abs() <= 0.3, "{what}: errors {errors:?}");
    }
}

#[test]
fn dispersion_relation_of_the_standing_wave() {
    let w = StandingWave::new(1.0, 3.0, 2.0, 1.0, -1.0);
    assert!((w.omega * w.omega - 11.0).abs() < 1e-12);
    // y_tt = y_xx - m² y at a sample point, by differences
    let (t, x, h) = (0.3, 0.7, 1e-4);
    let ytt = (w.y(t + h, x) - 2.0 * w.y(t, x) + w.y(t - h, x)) / (h * h);
    let yxx = (w.y(t, x + h) - 2.0 * w.y(t, x) + w.y(t, x - h)) / (h * h);
    assert!((ytt - yxx + 2.0 * w.y(t, x)).abs() < 1e-5);
}

#[test]
fn standing_wave_converges_at_second_order() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let errors: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&nx| {
            let sol = solve(&field, nx, Gauge::None);
            w.l2_error(&sol, sol.grid.steps, 0, |t, x| wave().y(t, x))
        })
        .collect();
    assert_order(&errors, "L2 error");
}

#[test]
fn hamilton_residuals_shrink_at_second_order() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let res: Vec<HamiltonResidual> = [64, 128, 256].iter().map(|&nx| w.hamilton_residual(&solve(&field, nx, Gauge::None)).unwrap()).collect();
    assert_order(&res.iter().map(|r| r.second).collect::<Vec<_>>(), "second equation");
    for r in &res {
        // the first equation and the determinant form hold exactly for this stencil
        assert!(r.first < 1e-12 && r.jacobian < 1e-12, "{r:?}");
    }
}

#[test]
fn constant_field_without_potential_stays_put() {
    let field = scalar_field_system(&ScalarFieldParams { potential: "0".into(), ..Default::default() }).unwrap();
    let w = WeylIntegrator::new(&field).unwrap();
    let grid = Grid::with_ratio(32, 2.0 * PI, 0.5, 1.0);
    let sol = w.integrate(&Slice { y: vec![0.7; 32], p0: vec![0.0; 32] }, &grid, Gauge::None).unwrap();
    assert!(sol.y.iter().flatten().all(|v| (v - 0.7).abs() < 1e-14));
    let r = w.hamilton_residual(&sol).unwrap();
    assert!(r.first.max(r.second).max(r.jacobian) <= 1e-12);
    let s = w.stress_divergence(&sol).unwrap();
    assert!(s.divergence.iter().chain(&s.residual).all(|v| *v <= 1e-12));
}

#[test]
fn cfl_violation_is_reported() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let grid = Grid::with_ratio(32, 2.0 * PI, 1.5, 1.0);
    assert!(matches!(w.integrate(&wave().initial(&grid), &grid, Gauge::None), Err(DynamicsError::Cfl { .. })));
}

#[test]
fn stress_energy_is_divergence_free_for_autonomous_lagrangians() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let res: Vec<StressResidual> = [64, 128, 256].iter().map(|&nx| w.stress_divergence(&solve(&field, nx, Gauge::None)).unwrap()).collect();
    for b in 0..2 {
        assert_order(&res.iter().map(|r| r.residual[b]).collect::<Vec<_>>(), "stress divergence");
        assert_order(&res.iter().map(|r| r.tensor_residual[b]).collect::<Vec<_>>(), "Hamiltonian tensor divergence");
    }
    assert!(res.iter().all(|r| r.tensor_match < 1e-12));
}

#[test]
fn explicit_position_dependence_shows_up_in_the_divergence() {
    let p = ScalarFieldParams { potential: "0.5*(1+0.9*cos(x2))*y1^2".into(), ..Default::default() };
    let field = scalar_field_system(&p).unwrap();
    let w = WeylIntegrator::new(&field).unwrap();
    let res: Vec<StressResidual> = [128, 256].iter().map(|&nx| w.stress_divergence(&solve(&field, nx, Gauge::None)).unwrap()).collect();
    // ∂L/∂x² does not vanish, the balance with it does
    assert!(res[1].divergence[1] > 0.01);
    assert!(res[1].residual[1] < 0.1 * res[1].divergence[1]);
    assert!(res[0].residual[1] / res[1].residual[1] > 3.0);
}

#[test]
fn stokes_identity_for_position_and_momentum_observables() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let sp = field.space();
    let c = sp.chart();
    let q = observables::position(sp, 0, &[parse("1+0.5*cos(2*x2)", c).unwrap(), Expr::zero()]);
    let p = observables::momentum(sp, sp.y(0), &parse("1+0.5*cos(2*x2)+0.2*sin(x2)", c).unwrap());
    for (a, name) in [(q, "Q"), (p, "P")] {
        let mut errors = vec![];
        for nx in [64, 128, 256] {
            let sol = solve(&field, nx, Gauge::None);
            let s = sol.grid.steps;
            let (lhs, rhs) = w.stokes_check(&sol, &a, &Region { t0: s / 4, t1: 3 * s / 4, x0: 0, x1: nx }).unwrap();
            assert!(rhs.abs() > 0.05, "{name}: trivial boundary integral");
            errors.push((lhs - rhs).abs());
        }
        assert_order(&errors, name);
    }
}

#[test]
fn stokes_on_a_sub_rectangle_and_an_empty_region() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let sp = field.space();
    let q = observables::position(sp, 0, &[parse("1+x2", sp.chart()).unwrap(), parse("x1", sp.chart()).unwrap()]);
    let sol = solve(&field, 128, Gauge::None);
    let (lhs, rhs) = w.stokes_check(&sol, &q, &Region { t0: 5, t1: 40, x0: 10, x1: 70 }).unwrap();
    assert!((lhs - rhs).abs() < 1e-3 * rhs.abs().max(1.0), "{lhs} {rhs}");
    assert_eq!(w.stokes_check(&sol, &q, &Region { t0: 5, t1: 5, x0: 10, x1: 70 }).unwrap(), (0.0, 0.0));
    assert!(w.stokes_check(&sol, &q, &Region { t0: 0, t1: 5, x0: 0, x1: 4 }).is_err());
}

#[test]
fn lower_degree_admissible_form_along_a_time_line() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let sp = field.space();
    let a = Form::scalar(sp.chart(), parse("(1+0.5*cos(x2))*y1", sp.chart()).unwrap());
    let mut errors = vec![];
    for nx in [64, 128, 256] {
        let sol = solve(&field, nx, Gauge::None);
        let s = sol.grid.steps;
        let (lhs, rhs) = w.line_check(&sol, &a, nx / 16, s / 4, 3 * s / 4).unwrap();
        assert!(rhs.abs() > 0.01);
        errors.push((lhs - rhs).abs());
    }
    assert_order(&errors, "0-form line integral");
}

#[test]
fn graph_residual_vanishes_on_solutions() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let sp = field.space();
    let c = sp.chart();
    let q = observables::position(sp, 0, &[parse("cos(x2)", c).unwrap(), parse("x1", c).unwrap()]);
    let p = observables::momentum(sp, sp.y(0), &parse("1+sin(x2)", c).unwrap());
    let sols: Vec<FieldSolution> = [64, 128, 256].iter().map(|&nx| solve(&field, nx, Gauge::None)).collect();
    let rq: Vec<f64> = sols.iter().map(|s| w.graph_residual(s, &q).unwrap()).collect();
    let rp: Vec<f64> = sols.iter().map(|s| w.graph_residual(s, &p).unwrap()).collect();
    // the first Hamilton equation is exact on this stencil
    assert!(rq.iter().all(|r| *r < 1e-12), "{rq:?}");
    assert_order(&rp, "dP - {Hω, P}");
}

#[test]
fn slice_integrals_recover_canonical_brackets() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let c = field.space().chart();
    let f = [parse("cos(x1)*(1+cos(2*x2))", c).unwrap(), parse("0.3*sin(x2)", c).unwrap()];
    let g = parse("(1+x1)*(1+0.5*cos(2*x2))", c).unwrap();
    // ∫ f⁰ g dx at t = π/4 by hand: cos(t)(1+t)∫(1+cos 2x)(1+0.5cos 2x) = cos(t)(1+t)·2π·1.25
    let t = PI / 4.0;
    let exact = t.cos() * (1.0 + t) * 2.0 * PI * 1.25;
    let mut eq = vec![];
    let mut ep = vec![];
    for nx in [64, 128, 256] {
        let sol = solve(&field, nx, Gauge::None);
        let b = w.slice_brackets(&sol, sol.grid.steps / 2, 0, &f, &g).unwrap();
        assert!((b.pq - b.target).abs() < 1e-10 && (b.target - exact).abs() < 1e-10, "{b:?}");
        assert!(b.qq.abs() < 1e-12 && b.pp.abs() < 1e-12);
        eq.push((b.dq_dt - b.eta_q).abs());
        ep.push((b.dp_dt - b.eta_p).abs());
    }
    assert_order(&eq, "d/dt ∫Q");
    assert_order(&ep, "d/dt ∫P");
}

#[test]
fn slice_energy_is_conserved_by_the_staggered_form() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let grid = Grid::with_ratio(128, 2.0 * PI, 0.5, 50.0 * wave().period());
    let hist = w.energy_history(&wave().initial(&grid), &grid, 100).unwrap();
    let e0 = hist[0].1;
    // ½(ω² A² + κ² A² + m² A²)/2 · 2π averaged over x, at t = 0
    let wv = wave();
    let exact = 0.25 * wv.amp * wv.amp * (wv.kappa * wv.kappa + 1.0) * 2.0 * PI;
    assert!((e0 - exact).abs() < 1e-2 * exact);
    let drift = hist.iter().map(|(_, e)| ((e - e0) / e0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-10, "{drift:e}");
    // the collocated slice energy agrees with it to discretization accuracy
    let sol = solve(&field, 128, Gauge::None);
    assert!((w.slice_energy(&sol, 0).unwrap() - exact).abs() < 1e-2 * exact);
}

#[test]
fn h0_gauge_sets_the_hamiltonian_to_zero() {
    let field = kg();
    let w = WeylIntegrator::new(&field).unwrap();
    let sol = solve(&field, 64, Gauge::H0);
    for lvl in [0, 7, sol.grid.steps] {
        for j in 0..64 {
            let pt = w.node_point(&sol, lvl, j);
            assert!(field.system.hamiltonian.eval(&pt).unwrap().abs() < 1e-12);
        }
    }
    let mut buf = Vec::new();
    w.write_csv(&sol, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains("eps") && header.starts_with("t,x,y1"), "{header}");
    let none = solve(&field, 64, Gauge::None);
    let mut buf = Vec::new();
    w.write_csv(&none, &mut buf).unwrap();
    assert!(!String::from_utf8(buf).unwrap().lines().next().unwrap().contains("eps"));
}

fn symplectic_euler(y: f64, p: f64, h: f64, steps: usize) -> (f64, f64) {
    let (mut y, mut p) = (y, p);
    for _ in 0..steps {
        p -= h * y;
        y += h * p;
    }
    (y, p)
}

#[test]
fn oscillator_in_one_dimension() {
    let p = ScalarFieldParams { n: 1, metric: Some(vec![vec!["1".into()]]), ..Default::default() };
    let field = scalar_field_system(&p).unwrap();
    let traj = integrate_mechanics(&field, &[1.0], &[0.0], 1e-3, 10_000).unwrap();
    assert!(traj.relative_drift() <= 1e-6, "{}", traj.relative_drift());
    let (ye, pe) = symplectic_euler(1.0, 0.0, 1e-6, 10_000_000);
    let last = traj.y.len() - 1;
    assert!((traj.y[last][0] - ye).abs() < 1e-5 && (traj.p[last][0] - pe).abs() < 1e-5);
    assert!((traj.y[last][0] - 10f64.cos()).abs() < 1e-5);
}

use super::*;
use crate::expr::{jet_gradient_error, parse};

fn max_at(e: &Expr, pts: &[Vec<f64>]) -> f64 {
    pts.iter().map(|p| e.eval(p).unwrap().abs()).fold(0.0, f64::max)
}

#[test]
fn symbolic_inverse_of_a_position_dependent_metric() {
    let chart = Chart::new(&["x1", "x2", "x3"]).unwrap();
    let m: Vec<Vec<Expr>> = [["2+x1^2", "x2", "0"], ["x2", "3", "x3"], ["0", "x3", "1+x1^2"]]
        .iter()
        .map(|r| r.iter().map(|t| parse(t, &chart).unwrap()).collect())
        .collect();
    let inv = sym_inverse(&m);
    for p in probe::points(4, 3, 10, -1.0, 1.0) {
        for r in 0..3 {
            for c in 0..3 {
                let s: f64 = (0..3).map(|j| m[r][j].eval(&p).unwrap() * inv[j][c].eval(&p).unwrap()).sum();
                assert!((s - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn bad_metrics_are_rejected() {
    let p = ScalarFieldParams { metric: Some(vec![vec!["1".into(), "x1".into()], vec!["0".into(), "1".into()]]), ..Default::default() };
    assert!(matches!(scalar_field_system(&p), Err(SystemError::MetricNotSymmetric(0, 1))));
    let p = ScalarFieldParams { metric: Some(vec![vec!["0".into(), "0".into()], vec!["0".into(), "1".into()]]), ..Default::default() };
    assert!(matches!(scalar_field_system(&p), Err(SystemError::MetricSingular { .. })));
    assert!(matches!(build_system("membrane", &serde_json::Value::Null), Err(SystemError::Unknown(_))));
}

#[test]
fn klein_gordon_modes_solve_the_field_equation() {
    let sys = scalar_field_system(&ScalarFieldParams::default()).unwrap();
    let c = sys.space().chart();
    let pts = sys.space().probe_points(1, 50);
    let harmonic = parse("x1*x2", c).unwrap();
    let massless = scalar_field_system(&ScalarFieldParams { potential: "0".into(), ..Default::default() }).unwrap();
    assert!(max_at(&massless.euler_lagrange(std::slice::from_ref(&harmonic)).unwrap()[0], &pts) < 1e-12);
    // ω² = k² + 1 with k = 2
    let mode = parse(&format!("cos({}*x1)*sin(2*x2)", 5f64.sqrt()), c).unwrap();
    assert!(max_at(&sys.euler_lagrange(std::slice::from_ref(&mode)).unwrap()[0], &pts) < 1e-10);
    let off = parse("cos(2*x1)*sin(2*x2)", c).unwrap();
    assert!(max_at(&sys.euler_lagrange(&[off]).unwrap()[0], &pts) > 0.1);
}

#[test]
fn curved_metric_field_equation_matches_hand_computation() {
    // g = diag(1, -(1+x1^2)), sqrt|g| = sqrt(1+x1^2), φ = x1: (1/g)∂_1(g) = x1/(1+x1^2)
    let p = ScalarFieldParams {
        metric: Some(vec![vec!["1".into(), "0".into()], vec!["0".into(), "-(1+x1^2)".into()]]),
        potential: "0".into(),
        ..Default::default()
    };
    let sys = scalar_field_system(&p).unwrap();
    let c = sys.space().chart();
    let r = &sys.euler_lagrange(&[parse("x1", c).unwrap()]).unwrap()[0];
    for pt in sys.space().probe_points(2, 20) {
        assert!((r.eval(&pt).unwrap() - pt[0] / (1.0 + pt[0] * pt[0])).abs() < 1e-12);
    }
}

#[test]
fn scalar_field_legendre_matches_closed_form() {
    for (n, k) in [(1, 1), (2, 1), (2, 2), (3, 1)] {
        let sys = scalar_field_system(&ScalarFieldParams { n, k, potential: "0.3*y1^2+0.1*y1^4".into(), ..Default::default() }).unwrap();
        let lh = sys.system.legendre().unwrap();
        for pt in sys.space().probe_points(3, 50) {
            let a = lh.eval(&pt).unwrap();
            let b = sys.system.hamiltonian.eval(&pt).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "n={n} k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn scalar_field_momentum_brackets() {
    let sys = scalar_field_system(&ScalarFieldParams { k: 2, ..Default::default() }).unwrap();
    let sp = sys.space();
    let alg = sys.system.algebra();
    let f = parse("1+x1*x2", sp.chart()).unwrap();
    let pts = sp.probe_points(5, 30);
    for i in 0..2 {
        let p = alg.xi(&sys.momentum(i, &f)).unwrap();
        for j in 0..2 {
            // Q^{j} = φ^j ω_1: {P_{i,f}, Q} = δ f ω_1
            let q = alg.xi(&observables::position(sp, j, &[Expr::one(), Expr::zero()])).unwrap();
            let b = alg.internal(&p, &q).unwrap();
            let want = if i == j { sp.volume_alpha(0).scale(&f) } else { Form::zero(sp.chart(), 1) };
            assert!(max_abs_at(&b.minus(&want), &pts).unwrap() < 1e-10);
        }
    }
}

#[test]
fn string_k_inverts_m_on_r_and_its_gradient_matches_differences() {
    let p = StringParams {
        k: 2,
        target: Some(vec![vec!["1+y1^2".into(), "0".into()], vec!["0".into(), "2".into()]]),
        b: Some(vec![vec!["0".into(), "0.3*y2".into()], vec!["-0.3*y2".into(), "0".into()]]),
        ..Default::default()
    };
    let s = string_system(&p).unwrap();
    let sp = s.space();
    for raw in sp.probe_points(7, 50) {
        let pt = s.onto_r(&raw).unwrap();
        let m = s.m_matrix(&pt).unwrap();
        let kk = s.k_matrix(&pt).unwrap();
        assert!((&m * &kk - DMatrix::identity(4, 4)).abs().max() < 1e-10);
        assert!((&m - m.transpose()).abs().max() < 1e-12, "M symmetric on R");
    }
    let e = KEntry { data: s.data.clone(), row: 1, col: 2, name: "K".into() };
    let h = StringHamiltonian(s.data.clone());
    for raw in sp.probe_points(8, 5) {
        let pt = s.onto_r(&raw).unwrap();
        assert!(jet_gradient_error(&e, &pt, 1e-6).unwrap() < 1e-6);
        assert!(jet_gradient_error(&h, &pt, 1e-6).unwrap() < 1e-6);
    }
}

#[test]
fn string_legendre_matches_closed_form() {
    let p = StringParams {
        k: 2,
        b: Some(vec![vec!["0".into(), "0.5".into()], vec!["-0.5".into(), "0".into()]]),
        ..Default::default()
    };
    let s = string_system(&p).unwrap();
    let lh = s.system.legendre().unwrap();
    let mut checked = 0;
    for raw in s.space().probe_points(9, 50) {
        let pt = s.onto_r(&raw).unwrap();
        let a = lh.eval(&pt).unwrap();
        let b = s.system.hamiltonian.eval(&pt).unwrap();
        assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        checked += 1;
    }
    assert_eq!(checked, 50);
}

#[test]
fn maxwell_rejects_unconserved_current_and_naive_hamiltonian() {
    let p = MaxwellParams { current: Some(vec!["x1".into(), "0".into()]), ..Default::default() };
    assert!(matches!(maxwell_system(&p), Err(SystemError::CurrentNotConserved { .. })));
    let m = maxwell_system(&MaxwellParams::default()).unwrap();
    assert!(matches!(m.naive_weyl_hamiltonian(false), Err(SystemError::NaiveMaxwell)));
    let (weyl, h) = m.naive_weyl_hamiltonian(true).unwrap();
    assert_eq!(weyl.kind(), PhaseKind::Weyl);
    assert!(h.eval(&weyl.probe_points(1, 1)[0]).is_ok());
}

#[test]
fn maxwell_lagrangian_is_degenerate() {
    let m = maxwell_system(&MaxwellParams::default()).unwrap();
    let lh = m.system.legendre().unwrap();
    let pt = m.space().probe_points(2, 1).remove(0);
    assert!(matches!(lh.solve(&pt), Err(LegendreError::SingularHessian { .. })));
}

#[test]
fn maxwell_manufactured_solution() {
    let base = MaxwellSystem::base_for_tests(2);
    let a = vec![Expr::zero(), parse("sin(x1)", &base).unwrap()];
    let free = maxwell_system(&MaxwellParams::default()).unwrap();
    let current = free.manufactured_current(&a).unwrap();
    let m = maxwell_system(&MaxwellParams { current: Some(current), ..Default::default() }).unwrap();
    let [r_pi, r_a, r_h] = m.graph_residuals(&a).unwrap();
    assert!(r_pi <= 1e-10, "dπ - j = {r_pi:e}");
    assert!(r_a <= 1e-10, "dA - ggp = {r_a:e}");
    assert!(r_h <= 1e-10, "dA - {{Hω, A}} = {r_h:e}");
    // without the source the same field fails dπ = j
    assert!(free.graph_residuals(&a).unwrap()[0] > 0.1);
}

#[test]
fn maxwell_gauge_generator_brackets() {
    for n in 2..=3 {
        let m = maxwell_system(&MaxwellParams { n, ..Default::default() }).unwrap();
        let sp = m.space();
        let f = parse(if n == 2 { "x1*x2+sin(x2)" } else { "x1*x3+x2^2" }, sp.chart()).unwrap();
        let (with_a, with_pi) = m.gauge_brackets(&f).unwrap();
        let pts = sp.probe_points(11, 20);
        assert!(with_a.max_abs_at(&pts).unwrap() < 1e-10, "n={n}");
        assert!(with_pi.max_abs_at(&pts).unwrap() < 1e-10, "n={n}");
    }
}

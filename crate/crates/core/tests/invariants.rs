use std::sync::{Arc, OnceLock};

use pataplectic::brackets::{observables, Algebra};
use pataplectic::chart::Chart;
use pataplectic::expr::{parse, Expr};
use pataplectic::exterior::{Form, MultiIndex};
use pataplectic::phase::PhaseSpace;
use proptest::prelude::*;

fn chart() -> Arc<Chart> {
    static CHART: OnceLock<Arc<Chart>> = OnceLock::new();
    CHART.get_or_init(|| Arc::new(Chart::new(&["a", "b", "c", "e"]).unwrap())).clone()
}

fn expr(vars: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(-3.0..3.0f64).prop_map(Expr::constant), (0..vars).prop_map(Expr::var)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            (inner.clone(), 1..4i32).prop_map(|(a, k)| a.powi(k)),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.prop_map(|a| a.sin().exp()),
        ]
    })
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, dim)
}

fn form(degree: usize) -> impl Strategy<Value = Form> {
    let sets = MultiIndex::subsets(4, degree);
    prop::collection::vec(expr(4), sets.len()).prop_map(move |coefs| {
        let mut f = Form::zero(&chart(), degree);
        for (set, c) in sets.iter().zip(coefs) {
            f.add_term(&set.to_vec(), c);
        }
        f
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_parse_back(e in expr(4), pt in point(4)) {
        let c = chart();
        let back = parse(&e.print(&c), &c).unwrap();
        prop_assert!(close(e.eval(&pt).unwrap(), back.eval(&pt).unwrap()));
    }

    #[test]
    fn derivative_matches_central_differences(e in expr(2), pt in point(2)) {
        let h = 1e-5;
        for c in 0..2 {
            let (mut up, mut down) = (pt.clone(), pt.clone());
            up[c] += h;
            down[c] -= h;
            let fd = (e.eval(&up).unwrap() - e.eval(&down).unwrap()) / (2.0 * h);
            let g = e.derivative(c).eval(&pt).unwrap();
            prop_assert!((g - fd).abs() <= 1e-4 * (1.0 + g.abs()), "{g} vs {fd}");
        }
    }

    #[test]
    fn d_squared_vanishes(f in (0..3usize).prop_flat_map(form), pt in point(4)) {
        prop_assert!(f.d().unwrap().d().unwrap().eval(&pt).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn d_is_a_graded_derivation(a in form(1), b in form(2), pt in point(4)) {
        // d(a∧b) = da∧b - a∧db for a 1-form a
        let lhs = a.wedge(&b).unwrap().d().unwrap();
        let rhs = a.d().unwrap().wedge(&b).unwrap().minus(&a.wedge(&b.d().unwrap()).unwrap());
        prop_assert!(lhs.minus(&rhs).eval(&pt).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn wedge_is_graded_commutative(a in form(1), b in form(2), c in form(1), pt in point(4)) {
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        prop_assert!(ab.minus(&ba).eval(&pt).unwrap().max_abs() <= 1e-9);
        let ac = a.wedge(&c).unwrap();
        let ca = c.wedge(&a).unwrap();
        prop_assert!(ac.plus(&ca).eval(&pt).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn omega_is_closed(n in 2..4usize, k in 1..3usize, seed in any::<u64>()) {
        for sp in [PhaseSpace::full(n, k).unwrap(), PhaseSpace::weyl(n, k).unwrap()] {
            let d_omega = sp.omega().d().unwrap();
            for pt in sp.probe_points(seed, 3) {
                prop_assert!(d_omega.eval(&pt).unwrap().max_abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn bracket_is_antisymmetric(c1 in 0.5..2.0f64, c2 in -1.0..1.0f64, seed in any::<u64>()) {
        let sp = PhaseSpace::weyl(2, 1).unwrap();
        let alg = Algebra::new(&sp).with_probe(seed, 5);
        let x = Expr::var(sp.x(0));
        let y = Expr::var(sp.y(0));
        let q = alg.xi(&observables::position(&sp, 0, &[Expr::zero(), x.mul(&Expr::constant(c1))])).unwrap();
        let p = alg.xi(&observables::momentum(&sp, sp.y(0), &x.cos().add(&Expr::constant(c2)))).unwrap();
        let r = alg.xi(&observables::momentum(&sp, sp.y(0), &y.mul(&Expr::constant(c1)))).unwrap();
        for (u, v) in [(&q, &p), (&p, &r), (&q, &r)] {
            let sum = alg.internal(u, v).unwrap().plus(&alg.internal(v, u).unwrap());
            prop_assert!(alg.residual(&sum).unwrap() <= 1e-9);
        }
    }
}

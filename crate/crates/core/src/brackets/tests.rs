use super::observables::*;
use super::*;
use crate::expr::parse;
use crate::phase::{PhaseKind, PhaseSpec};

fn ex(space: &PhaseSpace, s: &str) -> Expr {
    parse(s, space.chart()).unwrap()
}

fn vanishes(alg: &Algebra<'_>, f: &Form) -> f64 {
    alg.residual(f).unwrap()
}

fn zeta(space: &PhaseSpace, coeffs: &[&str]) -> Form {
    let mut z = Form::zero(space.chart(), space.n() - 1);
    for (set, c) in MultiIndex::subsets(space.q_dim(), space.n() - 1).iter().zip(coeffs) {
        z.add_term(&set.to_vec(), ex(space, c));
    }
    z
}

fn spaces() -> Vec<PhaseSpace> {
    vec![
        PhaseSpace::full(2, 2).unwrap(),
        PhaseSpace::weyl(2, 1).unwrap(),
        PhaseSpec::new(PhaseKind::Full, 2, 1).density("1 + x1^2").build().unwrap(),
        PhaseSpace::full(1, 2).unwrap(),
        PhaseSpace::weyl(3, 1).unwrap(),
    ]
}

#[test]
fn solver_agrees_with_closed_forms() {
    for sp in spaces() {
        let alg = Algebra::new(&sp);
        let names = sp.chart().names();
        let y = &names[sp.n()];
        let x = &names[0];
        let z = zeta(&sp, &[&format!("{y}^2 * {x}"), &format!("sin({x}) + {y}"), "1", &format!("{x}*{y}")]);
        let closed = alg.xi_q(&z).unwrap();
        let solved = alg.xi(&z).unwrap();
        for pt in alg.points() {
            let a = closed.xi.eval_vector(pt).unwrap();
            let b = solved.xi.eval_vector(pt).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-10, "{u} vs {v}");
            }
        }
        let mut field = vec![Expr::zero(); sp.q_dim()];
        field[0] = ex(&sp, &format!("{y} * {x}"));
        field[sp.n()] = ex(&sp, &format!("{x}^2 - {y}"));
        let closed = alg.xi_p(&field).unwrap();
        let solved = alg.xi(&closed.form).unwrap();
        for pt in alg.points() {
            let a = closed.xi.eval_vector(pt).unwrap();
            let b = solved.xi.eval_vector(pt).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-9, "{u} vs {v}");
            }
        }
    }
}

#[test]
fn momentum_dependent_forms_outside_the_algebra_are_rejected() {
    let sp = PhaseSpace::full(2, 1).unwrap();
    let alg = Algebra::new(&sp);
    let p = Expr::var(sp.momentum(1));
    let a = sp.dx(0).scale(&p.powi(2));
    assert!(matches!(alg.xi(&a), Err(BracketError::NotInPn1 { .. })));
    assert!(matches!(alg.xi(&Form::scalar(sp.chart(), p)), Err(BracketError::Degree(_))));
    assert!(matches!(alg.xi_q(&sp.dx(0).scale(&Expr::var(sp.momentum(0)))), Err(BracketError::NotBaseForm)));
}

#[test]
fn bracket_differential_and_jacobi_defect() {
    for sp in spaces() {
        let alg = Algebra::new(&sp);
        let names = sp.chart().names().to_vec();
        let (x, y) = (&names[0], &names[sp.n()]);
        let a = alg.xi(&zeta(&sp, &[&format!("{x}*{y}^2"), &format!("cos({y})"), x, y])).unwrap();
        let mut f = vec![Expr::zero(); sp.q_dim()];
        f[sp.n()] = ex(&sp, &format!("{y}^2 + {x}"));
        f[0] = ex(&sp, &y.to_string());
        let b = alg.xi_p(&f).unwrap();
        let mut f2 = vec![Expr::zero(); sp.q_dim()];
        f2[0] = ex(&sp, &format!("{x}*{y}"));
        let c = alg.xi_p(&f2).unwrap();
        for (u, v) in [(&a, &b), (&b, &c), (&b, &a), (&c, &c)] {
            let ab = alg.internal_pair(u, v).unwrap();
            let exact = ab.form.d().unwrap().plus(&alg.omega().contract(&ab.xi).unwrap());
            assert!(vanishes(&alg, &exact) < 1e-10);
            let solved = alg.xi(&ab.form).unwrap();
            let diff = solved.xi.minus(&ab.xi);
            for pt in alg.points() {
                assert!(diff.eval_vector(pt).unwrap().iter().all(|v| v.abs() < 1e-9));
            }
        }
        // {{a,b},c} + {{b,c},a} + {{c,a},b} = d(ξc ⨼ ξb ⨼ ξa ⨼ Ω)
        let ab = alg.internal_pair(&a, &b).unwrap();
        let bc = alg.internal_pair(&b, &c).unwrap();
        let ca = alg.internal_pair(&c, &a).unwrap();
        let lhs = alg.internal(&ab, &c).unwrap().plus(&alg.internal(&bc, &a).unwrap()).plus(&alg.internal(&ca, &b).unwrap());
        let rhs = if sp.n() < 2 {
            Form::zero(sp.chart(), 0)
        } else {
            alg.omega().contract(&a.xi).unwrap().contract(&b.xi).unwrap().contract(&c.xi).unwrap().d().unwrap()
        };
        assert!(vanishes(&alg, &lhs.minus(&rhs)) < 1e-9);
    }
}

#[test]
fn canonical_relations() {
    let sp = PhaseSpace::full(2, 2).unwrap();
    let alg = Algebra::new(&sp);
    let q1 = alg.xi_q(&zeta(&sp, &["y1*x1", "y2^2", "x2", "sin(y1)", "y1*y2", "x1"])).unwrap();
    let q2 = alg.xi_q(&zeta(&sp, &["exp(x1)", "y1", "y2*x2", "1", "x1*y1", "y2"])).unwrap();
    assert!(vanishes(&alg, &alg.internal(&q1, &q2).unwrap()) < 1e-12);

    let f1: Vec<Expr> = ["y1", "x1*x2", "y2*x1", "1"].iter().map(|s| ex(&sp, s)).collect();
    let f2: Vec<Expr> = ["x2^2", "0", "y1*y2", "x1"].iter().map(|s| ex(&sp, s)).collect();
    let p1 = alg.xi_p(&f1).unwrap();
    let p2 = alg.xi_p(&f2).unwrap();
    let v1 = Multivector::vector(sp.chart(), &pad(&f1, sp.dim()));
    let v2 = Multivector::vector(sp.chart(), &pad(&f2, sp.dim()));
    let commutator = v1.lie_bracket(&v2).unwrap();
    let comm_field: Vec<Expr> = (0..sp.q_dim()).map(|i| commutator.component(i)).collect();
    let expected = generalized_momentum(&sp, &comm_field).plus(&sp.theta().contract(&v1).unwrap().contract(&v2).unwrap().d().unwrap());
    assert!(vanishes(&alg, &alg.internal(&p1, &p2).unwrap().minus(&expected)) < 1e-10);

    let dz = q1.form.d().unwrap().contract(&v1).unwrap();
    assert!(vanishes(&alg, &alg.internal(&p1, &q1).unwrap().minus(&dz)) < 1e-10);
}

#[test]
fn bracket_table() {
    let sp = PhaseSpace::weyl(2, 2).unwrap();
    let alg = Algebra::new(&sp);
    let f: Vec<Expr> = ["x2", "x1^2"].iter().map(|s| ex(&sp, s)).collect();
    let g = ex(&sp, "1 + x1*x2");
    let gt = ex(&sp, "x2");
    for i in 0..2 {
        for j in 0..2 {
            let p = alg.xi(&momentum(&sp, sp.y(i), &g)).unwrap();
            let q = alg.xi(&position(&sp, j, &f)).unwrap();
            let mut expected = Form::zero(sp.chart(), 1);
            if i == j {
                for (alpha, fa) in f.iter().enumerate() {
                    expected = expected.plus(&sp.volume_alpha(alpha).scale(&fa.mul(&g)));
                }
            }
            assert!(vanishes(&alg, &alg.internal(&p, &q).unwrap().minus(&expected)) < 1e-10);
            let p2 = alg.xi(&momentum(&sp, sp.y(j), &gt)).unwrap();
            let exp_pp = sp.theta().contract(&sp.partial(sp.y(i))).unwrap().contract(&sp.partial(sp.y(j))).unwrap().scale(&g.mul(&gt)).d().unwrap();
            assert!(vanishes(&alg, &alg.internal(&p, &p2).unwrap().minus(&exp_pp)) < 1e-10);
        }
    }
}

#[test]
fn superbracket_graded_antisymmetry_and_expansion() {
    let sp = PhaseSpace::weyl(3, 1).unwrap();
    let alg = Algebra::new(&sp);
    let y = Form::scalar(sp.chart(), Expr::var(sp.y(0)));
    let one_form = sp.dx(0).scale(&ex(&sp, "y1*x2"));
    let sy = alg.superize(&y).unwrap();
    let s1 = alg.superize(&one_form).unwrap();
    let mut f = vec![Expr::zero(); sp.q_dim()];
    f[sp.y(0)] = ex(&sp, "x1");
    let a = alg.xi(&momentum(&sp, sp.y(0), &ex(&sp, "x3"))).unwrap();
    let sa = SuperPair::plain(&a);
    for (u, v) in [(&sy, &s1), (&sa, &sy), (&s1, &sa)] {
        let (du, dv) = (u.tau_degree().unwrap(), v.tau_degree().unwrap());
        let sign = if (du * dv + 1) % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = alg.sbracket(u, v).unwrap();
        let rhs = alg.sbracket(v, u).unwrap().scale_f64(sign);
        assert!(lhs.minus(&rhs).max_abs_at(alg.points()).unwrap() < 1e-10);
    }
    // base forms commute
    assert!(alg.sbracket(&sy, &s1).unwrap().max_abs_at(alg.points()).unwrap() < 1e-12);

    // {^s a, ^s b}_s = -^s(db) Ξ(a)(τ) + ^s{a,b}
    let b_forms = [y.clone(), one_form.clone()];
    let mut fa = vec![Expr::zero(); sp.q_dim()];
    fa[0] = ex(&sp, "y1");
    fa[sp.y(0)] = ex(&sp, "x2");
    let a2 = alg.xi_p(&fa).unwrap();
    for a in [&a, &a2] {
        let sa = SuperPair::plain(a);
        for b in &b_forms {
            let sb = alg.superize(b).unwrap();
            let lhs = alg.sbracket(&sa, &sb).unwrap();
            let xt: Vec<Expr> = (0..sp.n()).map(|al| a.xi.component(al)).collect();
            let db = b.d().unwrap();
            let ext = db.contract(&a.xi).unwrap();
            let rhs = alg.super_of(&db).times_tau(&xt).neg().plus(&alg.super_of(&ext));
            assert!(lhs.minus(&rhs).max_abs_at(alg.points()).unwrap() < 1e-10);
        }
    }
}

#[test]
fn noether_identity() {
    let sp = PhaseSpec::new(PhaseKind::Weyl, 2, 1).density("1 + x2^2").build().unwrap();
    let alg = Algebra::new(&sp);
    let h = ex(&sp, "eps + 0.5*(p1_1^2 - p2_1^2)/(1 + x2^2) + 0.5*y1^2");
    let field: Vec<Expr> = ["1", "0", "x1*y1"].iter().map(|s| ex(&sp, s)).collect();
    let (lhs, rhs) = alg.noether_sides(&field, &h).unwrap();
    assert!(vanishes(&alg, &lhs.minus(&rhs)) < 1e-10);
}

#[test]
fn admissibility() {
    let sp = PhaseSpace::weyl(2, 1).unwrap();
    let alg = Algebra::new(&sp);
    assert!(alg.is_admissible(&Form::scalar(sp.chart(), Expr::var(sp.y(0)))).unwrap());
    let r = alg.psi_bracket(&alg.h_omega(&ex(&sp, "eps + 0.5*p1_1^2")), &sp.dx(0).scale(&Expr::var(sp.y(0))));
    assert!(r.is_ok());
}

#[test]
fn general_solver_matches_symbolic() {
    let sp = PhaseSpace::full(2, 1).unwrap();
    let alg = Algebra::new(&sp);
    let z = zeta(&sp, &["y1^2", "x1", "x2*y1"]);
    let sym = alg.xi_q(&z).unwrap();
    let gen = xi_general(&sp, &z, 5).unwrap();
    assert_eq!(gen.kernel_dim, 0);
    for pt in alg.points().iter().take(5) {
        let a = sym.xi.eval_vector(pt).unwrap();
        let b = gen.pair.xi.eval_vector(pt).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}

fn maxwell_constant(n: usize) -> f64 {
    let sp = PhaseSpace::maxwell(n).unwrap();
    let alg = Algebra::new(&sp);
    let spi = alg.superize(&maxwell_pi(&sp)).unwrap();
    let sa = alg.superize(&maxwell_a(&sp)).unwrap();
    let br = alg.sbracket(&spi, &sa).unwrap();
    let one = alg.super_of(&Form::scalar(sp.chart(), Expr::one()));
    let pt = &alg.points()[0];
    let (mask, f) = one.terms().iter().next().unwrap();
    let key = f.terms().keys().next().unwrap().to_vec();
    let c = br.component(*mask).unwrap().coefficient(&key).eval(pt).unwrap() / f.coefficient(&key).eval(pt).unwrap();
    assert!(br.minus(&one.scale_f64(c)).max_abs_at(alg.points()).unwrap() < 1e-10);
    c
}

#[test]
fn maxwell_pi_a_constant_is_sign_n_times_n_minus_one() {
    for n in 2..=4 {
        let expected = if n % 2 == 0 { 1.0 } else { -1.0 } * (n as f64 - 1.0);
        assert!((maxwell_constant(n) - expected).abs() < 1e-10);
    }
}

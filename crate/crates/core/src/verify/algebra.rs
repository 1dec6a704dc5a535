//! Bracket algebra, structural and Maxwell suites.

use std::error::Error;

use nalgebra::{DMatrix, DVector};

use super::{Draw, Row, SuiteOptions};
use crate::brackets::observables::{self, generalized_momentum, momentum, position};
use crate::brackets::{max_abs_at, pad, xi_general, Algebra, BracketError, SuperPair};
use crate::chart::Chart;
use crate::expr::{parse, Expr};
use crate::exterior::{Form, Multivector};
use crate::phase::{PhaseKind, PhaseSpace, PhaseSpec};
use crate::systems::{maxwell_system, scalar_field_system, MaxwellParams, ScalarFieldParams};

const TOL: f64 = 1e-9;
const SWEEP: [(usize, usize); 4] = [(2, 1), (2, 2), (3, 1), (3, 2)];

type R<T> = Result<T, Box<dyn Error>>;

fn tag(n: usize, k: usize) -> String {
    format!("n{n}k{k}")
}

fn vector_gap(a: &Multivector, b: &Multivector, pts: &[Vec<f64>]) -> R<f64> {
    let diff = a.minus(b);
    let mut worst: f64 = 0.0;
    for p in pts {
        worst = diff.eval_vector(p)?.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(worst)
}

/// `∂H/∂p^α_i` on a chart where `p^α_i` may be a signed coordinate.
pub(super) fn dh_dp(sp: &PhaseSpace, h: &Expr, alpha: usize, i: usize) -> Expr {
    let p = sp.p_weyl(alpha, i);
    let c = *p.variables().iter().next().expect("Weyl momentum is a coordinate");
    h.derivative(c).scale(1.0 / p.derivative(c).as_const().expect("linear"))
}

/// `ε + ½ Σ (p^α_i)² + Σ c_i y_i²`, usable on any chart with Weyl momenta.
fn model_hamiltonian(sp: &PhaseSpace, draw: &mut Draw) -> Expr {
    let (e, s) = sp.eps();
    let mut h = Expr::var(e).scale(s);
    for i in 0..sp.k() {
        for a in 0..sp.n() {
            h = h.add(&sp.p_weyl(a, i).powi(2).scale(0.5 * draw.uniform(0.5, 1.5)));
        }
        h = h.add(&Expr::var(sp.y(i)).powi(2).scale(draw.uniform(0.1, 0.5)));
    }
    h
}

pub fn lemma2(o: &SuiteOptions) -> Vec<Row> {
    o.configs(&SWEEP)
        .into_iter()
        .map(|(n, k)| {
            Row::residual(format!("lemma2.{}", tag(n, k)), "d{a,b} = -[Ξ(a),Ξ(b)]⨼Ω", TOL, o.probes, || {
                let sp = PhaseSpace::full(n, k)?;
                let alg = Algebra::new(&sp).with_probe(o.seed ^ (n * 10 + k) as u64, o.probes);
                let mut d = Draw::new(o.seed.wrapping_add((n * 10 + k) as u64));
                let a = alg.xi_q(&d.zeta(&sp))?;
                let b = alg.xi_p(&d.field(&sp))?;
                let c = alg.xi_p(&d.field(&sp))?;
                let mut worst: f64 = 0.0;
                for (u, v) in [(&a, &b), (&b, &c), (&c, &a), (&b, &b)] {
                    let ab = alg.internal_pair(u, v)?;
                    worst = worst.max(alg.residual(&ab.form.d()?.plus(&alg.omega().contract(&ab.xi)?))?);
                    let solved = alg.xi(&ab.form)?;
                    worst = worst.max(vector_gap(&solved.xi, &ab.xi, alg.points())?);
                }
                Ok(worst)
            })
        })
        .collect()
}

pub fn lemma3(o: &SuiteOptions) -> Vec<Row> {
    o.configs(&SWEEP)
        .into_iter()
        .map(|(n, k)| {
            Row::residual(format!("lemma3.{}", tag(n, k)), "cyclic sum {{a,b},c} = d(Ξ(c)⨼Ξ(b)⨼Ξ(a)⨼Ω)", TOL, o.probes, || {
                let sp = PhaseSpace::full(n, k)?;
                let alg = Algebra::new(&sp).with_probe(o.seed ^ (n * 10 + k) as u64, o.probes);
                let mut d = Draw::new(o.seed.wrapping_add((n * 10 + k) as u64));
                let a = alg.xi_q(&d.zeta(&sp))?;
                let b = alg.xi_p(&d.field(&sp))?;
                let c = alg.xi_p(&d.field(&sp))?;
                let ab = alg.internal_pair(&a, &b)?;
                let bc = alg.internal_pair(&b, &c)?;
                let ca = alg.internal_pair(&c, &a)?;
                let lhs = alg.internal(&ab, &c)?.plus(&alg.internal(&bc, &a)?).plus(&alg.internal(&ca, &b)?);
                let rhs = alg.omega().contract(&a.xi)?.contract(&b.xi)?.contract(&c.xi)?.d()?;
                Ok(alg.residual(&lhs.minus(&rhs))?)
            })
        })
        .collect()
}

pub fn prop1(o: &SuiteOptions) -> Vec<Row> {
    let configs = o.configs(&SWEEP);
    let probes = o.probes * configs.len();
    let each = |f: &dyn Fn(&Algebra, &mut Draw) -> R<f64>| -> R<f64> {
        let mut worst: f64 = 0.0;
        for &(n, k) in &configs {
            let sp = PhaseSpace::full(n, k)?;
            let alg = Algebra::new(&sp).with_probe(o.seed ^ (n * 10 + k) as u64, o.probes);
            let mut d = Draw::new(o.seed.wrapping_add((n * 10 + k) as u64));
            worst = worst.max(f(&alg, &mut d)?);
        }
        Ok(worst)
    };
    vec![
        Row::residual("prop1.qq", "{Q^ζ1, Q^ζ2} = 0", TOL, probes, || {
            each(&|alg, d| {
                let sp = alg.space();
                let q1 = alg.xi_q(&d.zeta(sp))?;
                let q2 = alg.xi_q(&d.zeta(sp))?;
                Ok(alg.residual(&alg.internal(&q1, &q2)?)?)
            })
        }),
        Row::residual("prop1.pq", "{P_ξ, Q^ζ} = ξ⨼dζ", TOL, probes, || {
            each(&|alg, d| {
                let sp = alg.space();
                let f = d.field(sp);
                let p = alg.xi_p(&f)?;
                let q = alg.xi_q(&d.zeta(sp))?;
                let v = Multivector::vector(sp.chart(), &pad(&f, sp.dim()));
                Ok(alg.residual(&alg.internal(&p, &q)?.minus(&q.form.d()?.contract(&v)?))?)
            })
        }),
        Row::residual("prop1.pp", "{P_ξ1, P_ξ2} = P_[ξ1,ξ2] + d(ξ2⨼ξ1⨼θ)", TOL, probes, || {
            each(&|alg, d| {
                let sp = alg.space();
                let (f1, f2) = (d.field(sp), d.field(sp));
                let v1 = Multivector::vector(sp.chart(), &pad(&f1, sp.dim()));
                let v2 = Multivector::vector(sp.chart(), &pad(&f2, sp.dim()));
                let comm = v1.lie_bracket(&v2)?;
                let comm: Vec<Expr> = (0..sp.q_dim()).map(|i| comm.component(i)).collect();
                let want = generalized_momentum(sp, &comm).plus(&sp.theta().contract(&v1)?.contract(&v2)?.d()?);
                let got = alg.internal(&alg.xi_p(&f1)?, &alg.xi_p(&f2)?)?;
                Ok(alg.residual(&got.minus(&want))?)
            })
        }),
    ]
}

/// `(a, b, reference)` pairs of superforms for the graded checks.
fn super_pairs(alg: &Algebra, d: &mut Draw) -> R<Vec<(SuperPair, SuperPair)>> {
    let sp = alg.space();
    let y = Form::scalar(sp.chart(), Expr::var(sp.y(0)).mul(&d.base_coefficient(sp)));
    let one = sp.dx(sp.n() - 1).scale(&d.coefficient(sp));
    let a = alg.xi(&momentum(sp, sp.y(0), &d.base_coefficient(sp)))?;
    let (sy, s1, sa) = (alg.superize(&y)?, alg.superize(&one)?, SuperPair::plain(&a));
    Ok(vec![(sy.clone(), s1.clone()), (sa.clone(), sy), (s1, sa.clone()), (sa.clone(), sa)])
}

fn graded_gap(alg: &Algebra, u: &SuperPair, v: &SuperPair) -> R<f64> {
    let (du, dv) = (u.tau_degree().unwrap_or(0), v.tau_degree().unwrap_or(0));
    let sign = if (du * dv + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let lhs = alg.sbracket(u, v)?;
    let rhs = alg.sbracket(v, u)?.scale_f64(sign);
    Ok(lhs.minus(&rhs).max_abs_at(alg.points())?)
}

pub fn prop2(o: &SuiteOptions) -> Vec<Row> {
    let mut rows = vec![];
    for (n, k) in o.configs(&SWEEP) {
        let setup = move || -> R<(PhaseSpace, u64)> { Ok((PhaseSpace::weyl(n, k)?, o.seed.wrapping_add((n * 10 + k) as u64))) };
        rows.push(Row::residual(format!("prop2.graded.{}", tag(n, k)), "{A,B}_s = (-1)^(ab+1) {B,A}_s", TOL, o.probes, || {
            let (sp, s) = setup()?;
            let alg = Algebra::new(&sp).with_probe(s, o.probes);
            let mut d = Draw::new(s);
            let mut worst: f64 = 0.0;
            for (u, v) in super_pairs(&alg, &mut d)? {
                worst = worst.max(graded_gap(&alg, &u, &v)?);
            }
            Ok(worst)
        }));
        rows.push(Row::residual(format!("prop2.expansion.{}", tag(n, k)), "{^sa, ^sb}_s + ^s(db)·Ξ(a)(τ) - ^s{a,b} = 0", TOL, o.probes, || {
            let (sp, s) = setup()?;
            let alg = Algebra::new(&sp).with_probe(s, o.probes);
            let mut d = Draw::new(s);
            let y = Form::scalar(sp.chart(), Expr::var(sp.y(k - 1)).mul(&d.base_coefficient(&sp)));
            let one = sp.dx(0).scale(&d.coefficient(&sp));
            let mut f = vec![Expr::zero(); sp.q_dim()];
            f[0] = d.base_coefficient(&sp);
            f[sp.y(0)] = d.coefficient(&sp);
            let plain = alg.xi(&momentum(&sp, sp.y(0), &d.base_coefficient(&sp)))?;
            let mixed = alg.xi_p(&f)?;
            let mut worst: f64 = 0.0;
            for a in [&plain, &mixed] {
                let sa = SuperPair::plain(a);
                let tau: Vec<Expr> = (0..n).map(|al| a.xi.component(al)).collect();
                // b runs over forms of degree at most n - 2
                for b in [&y, &one].into_iter().filter(|b| b.degree() + 2 <= n) {
                    let lhs = alg.sbracket(&sa, &alg.superize(b)?)?;
                    let db = b.d()?;
                    let rhs = alg.super_of(&db).times_tau(&tau).neg().plus(&alg.super_of(&db.contract(&a.xi)?));
                    worst = worst.max(lhs.minus(&rhs).max_abs_at(alg.points())?);
                }
            }
            Ok(worst)
        }));
    }
    rows
}

pub fn table(o: &SuiteOptions) -> Vec<Row> {
    let mut rows = vec![];
    for (n, k) in o.configs(&SWEEP) {
        let s = o.seed.wrapping_add((n * 10 + k) as u64);
        let make = move || -> R<(PhaseSpace, Vec<Expr>, Expr, Expr)> {
            let sp = PhaseSpace::weyl(n, k)?;
            let mut d = Draw::new(s);
            let f: Vec<Expr> = (0..n).map(|_| d.base_coefficient(&sp)).collect();
            let (g, gt) = (d.base_coefficient(&sp), d.base_coefficient(&sp));
            Ok((sp, f, g, gt))
        };
        rows.push(Row::residual(format!("table.pq.{}", tag(n, k)), "{P_{i,g}, Q^{j,f}} = δ_ij g f^α ω_α", TOL, o.probes, || {
            let (sp, f, g, _) = make()?;
            let alg = Algebra::new(&sp).with_probe(s, o.probes);
            let mut worst: f64 = 0.0;
            for i in 0..k {
                let p = alg.xi(&momentum(&sp, sp.y(i), &g))?;
                for j in 0..k {
                    let q = alg.xi(&position(&sp, j, &f))?;
                    let mut want = Form::zero(sp.chart(), n - 1);
                    if i == j {
                        for (al, fa) in f.iter().enumerate() {
                            want = want.plus(&sp.volume_alpha(al).scale(&fa.mul(&g)));
                        }
                    }
                    worst = worst.max(alg.residual(&alg.internal(&p, &q)?.minus(&want))?);
                }
            }
            Ok(worst)
        }));
        rows.push(Row::residual(format!("table.pp.{}", tag(n, k)), "{P_{i,g}, P_{j,h}} = d(g h ∂_j⨼∂_i⨼θ)", TOL, o.probes, || {
            let (sp, _, g, gt) = make()?;
            let alg = Algebra::new(&sp).with_probe(s, o.probes);
            let mut worst: f64 = 0.0;
            for i in 0..k {
                let p = alg.xi(&momentum(&sp, sp.y(i), &g))?;
                for j in 0..k {
                    let p2 = alg.xi(&momentum(&sp, sp.y(j), &gt))?;
                    let want = sp.theta().contract(&sp.partial(sp.y(i)))?.contract(&sp.partial(sp.y(j)))?.scale(&g.mul(&gt)).d()?;
                    worst = worst.max(alg.residual(&alg.internal(&p, &p2)?.minus(&want))?);
                }
            }
            Ok(worst)
        }));
        rows.push(Row::residual(format!("table.qq.{}", tag(n, k)), "{Q^{i,f}, Q^{j,f'}} = 0", TOL, o.probes, || {
            let (sp, f, _, _) = make()?;
            let alg = Algebra::new(&sp).with_probe(s, o.probes);
            let mut worst: f64 = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let a = alg.xi(&position(&sp, i, &f))?;
                    let b = alg.xi(&position(&sp, j, &f))?;
                    worst = worst.max(alg.residual(&alg.internal(&a, &b)?)?);
                }
            }
            Ok(worst)
        }));
    }
    rows
}

/// `da` with every `dy^i` replaced by `Σ_α ∂H/∂p^α_i dx^α`.
pub(super) fn hamilton_image(sp: &PhaseSpace, a: &Form, h: &Expr) -> R<Form> {
    let da = a.d()?;
    let chart = sp.chart();
    let mut out = Form::zero(chart, da.degree());
    for (idx, coef) in da.terms() {
        let mut term = Form::scalar(chart, coef.clone());
        for c in idx.iter() {
            let factor = match (0..sp.k()).find(|&i| sp.y(i) == c) {
                Some(i) => {
                    let mut s = Form::zero(chart, 1);
                    for al in 0..sp.n() {
                        s = s.plus(&sp.dx(al).scale(&dh_dp(sp, h, al, i)));
                    }
                    s
                }
                None => Form::basis(chart, &[c]),
            };
            term = term.wedge(&factor)?;
        }
        out = out.plus(&term);
    }
    Ok(out)
}

pub fn admissible(o: &SuiteOptions) -> Vec<Row> {
    let mut rows = vec![];
    for (n, k) in o.configs(&[(2, 1), (3, 1), (2, 2)]) {
        let s = o.seed.wrapping_add((n * 10 + k) as u64);
        let forms = move |sp: &PhaseSpace, d: &mut Draw| -> Vec<Form> {
            let zero = Form::scalar(sp.chart(), Expr::var(sp.y(0)).mul(&d.base_coefficient(sp)));
            let one = sp.dx(0).scale(&d.coefficient(sp));
            vec![zero, one]
        };
        rows.push(Row::residual(format!("admissible.defect.{}", tag(n, k)), "Ξ(^s a) has no dx components", 1e-10, o.probes, || {
            let sp = PhaseSpace::weyl(n, k)?;
            let alg = Algebra::new(&sp).with_probe(s, o.probes);
            let mut d = Draw::new(s);
            let mut worst: f64 = 0.0;
            for a in forms(&sp, &mut d) {
                worst = worst.max(alg.admissibility_defect(&alg.superize(&a)?)?);
            }
            Ok(worst)
        }));
        rows.push(Row::residual(format!("admissible.h_omega.{}", tag(n, k)), "{Hω, a} = da with dy^i -> ∂H/∂p^α_i dx^α", TOL, o.probes, || {
            let sp = PhaseSpace::weyl(n, k)?;
            let alg = Algebra::new(&sp).with_probe(s, o.probes);
            let mut d = Draw::new(s);
            let h = model_hamiltonian(&sp, &mut d);
            let mut worst: f64 = 0.0;
            for a in forms(&sp, &mut d) {
                let got = alg.h_omega_bracket(&h, &a)?;
                worst = worst.max(alg.residual(&got.minus(&hamilton_image(&sp, &a, &h)?))?);
            }
            Ok(worst)
        }));
    }
    rows.push(Row::expect_error("admissible.rejects_momentum_forms", "p-dependent 0-form is not admissible", o.probes, || {
        let sp = PhaseSpace::weyl(2, 1)?;
        let alg = Algebra::new(&sp).with_probe(o.seed, o.probes);
        let a = Form::scalar(sp.chart(), sp.p_weyl(0, 0).powi(2));
        alg.psi_bracket(&alg.h_omega(&Expr::var(sp.eps().0)), &a)?;
        Ok(())
    }));
    rows
}

pub fn noether(o: &SuiteOptions) -> Vec<Row> {
    let cases: Vec<(String, Box<dyn Fn() -> R<PhaseSpace>>)> = vec![
        ("weyl.n2k1.curved".into(), Box::new(|| Ok(PhaseSpec::new(PhaseKind::Weyl, 2, 1).density("1 + x2^2").build()?))),
        ("weyl.n3k1".into(), Box::new(|| Ok(PhaseSpace::weyl(3, 1)?))),
        ("weyl.n2k2".into(), Box::new(|| Ok(PhaseSpace::weyl(2, 2)?))),
        ("full.n2k2".into(), Box::new(|| Ok(PhaseSpace::full(2, 2)?))),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(c, (name, make))| {
            Row::residual(format!("noether.{name}"), "{Hω, P_ξ} = L_Ξ(P_ξ)(θ - Hω) + d(ξ⨼Hω)", TOL, o.probes, || {
                let sp = make()?;
                let s = o.seed.wrapping_add(c as u64);
                let alg = Algebra::new(&sp).with_probe(s, o.probes);
                let mut d = Draw::new(s);
                let h = model_hamiltonian(&sp, &mut d);
                let (lhs, rhs) = alg.noether_sides(&d.admissible_field(&sp), &h)?;
                Ok(alg.residual(&lhs.minus(&rhs))?)
            })
        })
        .collect()
}

/// Residuals of an n-vector `X = X_1∧…∧X_n` with `X_α = ∂_α + Σ u_{α c} ∂_c`.
struct Plane<'a> {
    sp: &'a PhaseSpace,
    omega: crate::exterior::NumTensor,
    closed: crate::exterior::NumTensor,
    dh: Vec<f64>,
    free: Vec<usize>,
    /// `1/g`, so that `ω(X_1, …, X_n) = 1`.
    inv_density: f64,
}

impl Plane<'_> {
    fn vectors(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let m = self.free.len();
        (0..self.sp.n())
            .map(|al| {
                let mut v = vec![0.0; self.sp.dim()];
                v[self.sp.x(al)] = 1.0;
                for (j, &c) in self.free.iter().enumerate() {
                    v[c] = u[al * m + j];
                }
                if al == 0 {
                    v.iter_mut().for_each(|x| *x *= self.inv_density);
                }
                v
            })
            .collect()
    }

    /// `(-1)^n X⨼Ω - dH` with the `dx` components dropped.
    fn modulo_ideal(&self, u: &[f64]) -> DVector<f64> {
        let t = self.omega.fill(&self.vectors(u));
        let sign = if self.sp.n().is_multiple_of(2) { 1.0 } else { -1.0 };
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&c| sign * t.get(&[c]) - self.dh[c]))
    }

    /// `X⨼(Ω - d(Hω))`, all components.
    fn full(&self, u: &[f64]) -> f64 {
        self.closed.fill(&self.vectors(u)).max_abs()
    }
}

pub fn eq16(o: &SuiteOptions) -> Vec<Row> {
    let mut rows = vec![];
    for (n, k) in o.configs(&SWEEP) {
        let s = o.seed.wrapping_add((n * 10 + k) as u64);
        let run = move || -> R<(f64, f64, f64)> {
            let potential: Vec<String> = (1..=k).map(|i| format!("0.5*y{i}^2 + 0.1*y{i}^4")).collect();
            let metric = (n == 2).then(|| vec![vec!["1".into(), "0".into()], vec!["0".into(), "-(1+x1^2)".into()]]);
            let field = scalar_field_system(&ScalarFieldParams { n, k, metric, potential: potential.join(" + "), ..Default::default() })?;
            let sp = field.space();
            let h = &field.system.hamiltonian;
            let alg = Algebra::new(sp).with_probe(s, o.probes);
            let closed_form = sp.omega().minus(&sp.volume().scale(h).d()?);
            let mut d = Draw::new(s);
            let free: Vec<usize> = (sp.n()..sp.dim()).collect();
            let (mut on, mut eqs, mut off) = (0.0f64, 0.0f64, f64::INFINITY);
            for pt in alg.points() {
                let dh: Vec<f64> = (0..sp.dim()).map(|c| h.derivative(c).eval(pt)).collect::<Result<_, _>>()?;
                let g = sp.density().eval(pt)?;
                let plane = Plane { sp, omega: sp.omega().eval(pt)?, closed: closed_form.eval(pt)?, dh, free: free.clone(), inv_density: 1.0 / g };
                let size = n * free.len();
                let b = plane.modulo_ideal(&vec![0.0; size]);
                let mut a = DMatrix::zeros(free.len(), size);
                for j in 0..size {
                    let mut e = vec![0.0; size];
                    e[j] = 1.0;
                    a.set_column(j, &(plane.modulo_ideal(&e) - &b));
                }
                let u0 = DVector::from_iterator(size, (0..size).map(|_| d.uniform(-1.0, 1.0)));
                off = off.min(plane.full(u0.as_slice()));
                let pinv = a.clone().pseudo_inverse(1e-12)?;
                let u = &u0 - pinv * (&a * &u0 + &b);
                let r1 = (&a * &u + &b).amax();
                if r1 > 1e-10 {
                    return Err(format!("mod-ideal system not solvable: {r1:e}").into());
                }
                on = on.max(plane.full(u.as_slice()));
                // Hamilton's equations read off the plane
                let m = free.len();
                let slot = |c: usize| free.iter().position(|&f| f == c).expect("free");
                for i in 0..k {
                    let mut div = 0.0;
                    for al in 0..n {
                        let dy = u[al * m + slot(sp.y(i))];
                        eqs = eqs.max((dy - dh_dp(sp, h, al, i).eval(pt)?).abs());
                        let p = sp.p_weyl(al, i);
                        let c = *p.variables().iter().next().expect("coordinate");
                        let pv = p.eval(pt)?;
                        // (1/g) ∂_α(g p^α) with the density derivative from dω_α
                        div += u[al * m + slot(c)] * p.derivative(c).as_const().expect("linear") + pv * sp.density().derivative(sp.x(al)).eval(pt)? / g;
                    }
                    eqs = eqs.max((div + h.derivative(sp.y(i)).eval(pt)?).abs());
                }
            }
            Ok((on, eqs, off))
        };
        let id = tag(n, k);
        let res = run().map_err(|e| e.to_string());
        let pick = |f: fn(&(f64, f64, f64)) -> f64| -> R<f64> { res.as_ref().map(f).map_err(|e| e.clone().into()) };
        rows.push(Row::residual(format!("eq16.hamiltonian_plane.{id}"), "X⨼(Ω - d(Hω)) = 0 for X solving (-1)^n X⨼Ω = dH mod dx", TOL, o.probes, || pick(|r| r.0)));
        rows.push(Row::residual(format!("eq16.hamilton_equations.{id}"), "∂y/∂x^α = ∂H/∂p^α, (1/g) ∂_α(g p^α) = -∂H/∂y on that plane", TOL, o.probes, || pick(|r| r.1)));
        rows.push(Row::at_least(format!("eq16.generic_plane.{id}"), "X⨼(Ω - d(Hω)) ≠ 0 for random normalized X", 1e-3, o.probes, || pick(|r| r.2)));
    }
    rows
}

fn random_form(sp: &PhaseSpace, d: &mut Draw, degree: usize) -> Form {
    let mut f = Form::zero(sp.chart(), degree);
    let dim = sp.dim();
    for t in 0..3 {
        let idx: Vec<usize> = (0..degree).map(|j| (t * 7 + j * 5 + (d.uniform(0.0, dim as f64) as usize)) % dim).collect();
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() < degree {
            continue;
        }
        let p = Expr::var(sp.momentum(t % sp.momentum_count()));
        f.add_term(&sorted, d.coefficient(sp).mul(&p.add(&Expr::one())));
    }
    f
}

pub(super) fn structural_spaces() -> R<Vec<(&'static str, PhaseSpace)>> {
    Ok(vec![
        ("full.n2k2", PhaseSpace::full(2, 2)?),
        ("full.n3k1", PhaseSpace::full(3, 1)?),
        ("weyl.n3k2", PhaseSpace::weyl(3, 2)?),
        ("weyl.n2k1.curved", PhaseSpec::new(PhaseKind::Weyl, 2, 1).density("1 + x1^2").build()?),
        ("maxwell.n3", PhaseSpace::maxwell(3)?),
    ])
}

pub fn structural(o: &SuiteOptions) -> Vec<Row> {
    let spaces = structural_spaces;
    let mut rows = vec![];
    rows.push(Row::residual("structural.d_squared", "d(da) = 0", 1e-12, o.probes, || {
        let mut worst: f64 = 0.0;
        for (c, (_, sp)) in spaces()?.iter().enumerate() {
            let mut d = Draw::new(o.seed.wrapping_add(c as u64));
            let pts = sp.probe_points(o.seed, o.probes);
            for deg in 0..3 {
                let a = random_form(sp, &mut d, deg);
                worst = worst.max(max_abs_at(&a.d()?.d()?, &pts)?);
            }
        }
        Ok(worst)
    }));
    rows.push(Row::residual("structural.d_omega", "dΩ = 0 and dθ = Ω", 1e-12, o.probes, || {
        let mut worst: f64 = 0.0;
        for (_, sp) in spaces()? {
            let pts = sp.probe_points(o.seed, o.probes);
            worst = worst.max(max_abs_at(&sp.omega().d()?, &pts)?);
            worst = worst.max(max_abs_at(&sp.theta().d()?.minus(sp.omega()), &pts)?);
        }
        Ok(worst)
    }));
    for n in [2, 3] {
        rows.push(Row::residual(format!("structural.graded_antisymmetry.n{n}"), "{A,B}_s = (-1)^(ab+1) {B,A}_s", TOL, o.probes, || {
            let sp = PhaseSpace::weyl(n, 1)?;
            let alg = Algebra::new(&sp).with_probe(o.seed, o.probes);
            let mut d = Draw::new(o.seed.wrapping_add(n as u64));
            let mut worst: f64 = 0.0;
            for (u, v) in super_pairs(&alg, &mut d)? {
                worst = worst.max(graded_gap(&alg, &u, &v)?);
            }
            Ok(worst)
        }));
    }
    rows.push(Row::residual("structural.membership_accepts", "ξ⨼Ω + da = 0 for a in P^(n-1)M", TOL, o.probes, || {
        let mut worst: f64 = 0.0;
        for (c, (_, sp)) in spaces()?.iter().enumerate().filter(|(_, (_, sp))| sp.kind() != PhaseKind::Maxwell) {
            let alg = Algebra::new(sp).with_probe(o.seed, o.probes);
            let mut d = Draw::new(o.seed.wrapping_add(c as u64));
            let z = d.admissible_zeta(sp);
            let f = d.admissible_field(sp);
            for a in [z, generalized_momentum(sp, &f)] {
                let pair = alg.xi(&a)?;
                worst = worst.max(alg.residual(&alg.pair_defect(&a, &pair.xi)?)?);
            }
        }
        Ok(worst)
    }));
    rows.push(Row::at_least("structural.membership_rejects", "(p)² dx^1 is outside P^(n-1)M", 1e-3, o.probes, || {
        let sp = PhaseSpace::full(2, 1)?;
        let alg = Algebra::new(&sp).with_probe(o.seed, o.probes);
        let a = sp.dx(0).scale(&Expr::var(sp.momentum(1)).powi(2));
        match alg.xi(&a) {
            Err(BracketError::NotInPn1 { residual }) => Ok(residual),
            Err(e) => Err(e.into()),
            Ok(_) => Ok(0.0),
        }
    }));
    rows.push(Row::value("structural.xi_kernel", "kernel of X ↦ X⨼Ω on (n-1)-form fields", 0.0, 0.0, 5, || {
        let mut worst = 0usize;
        for (c, (_, sp)) in spaces()?.iter().enumerate().filter(|(_, (_, sp))| sp.kind() == PhaseKind::Full) {
            let mut d = Draw::new(o.seed.wrapping_add(c as u64));
            worst = worst.max(xi_general(sp, &d.zeta(sp), o.seed)?.kernel_dim);
        }
        Ok(worst as f64)
    }));
    rows
}

/// `c` with `{^sπ, ^sA}_s = c ^s1`, and the residual of that proportionality.
pub fn pi_a_constant(n: usize, seed: u64, probes: usize) -> Result<(f64, f64), Box<dyn Error>> {
    let sp = PhaseSpace::maxwell(n)?;
    let alg = Algebra::new(&sp).with_probe(seed, probes);
    let spi = alg.superize(&observables::maxwell_pi(&sp))?;
    let sa = alg.superize(&observables::maxwell_a(&sp))?;
    let br = alg.sbracket(&spi, &sa)?;
    let one = alg.super_of(&Form::scalar(sp.chart(), Expr::one()));
    let (mask, f) = one.terms().iter().next().ok_or("empty superform")?;
    let key = f.terms().keys().next().ok_or("empty form")?.to_vec();
    let pt = &alg.points()[0];
    let got = br.component(*mask).ok_or("bracket has no τ component")?;
    let c = got.coefficient(&key).eval(pt)? / f.coefficient(&key).eval(pt)?;
    Ok((c, br.minus(&one.scale_f64(c)).max_abs_at(alg.points())?))
}

fn maxwell_dims(o: &SuiteOptions) -> Vec<usize> {
    match o.n {
        Some(n) => vec![n],
        None => vec![2, 3, 4],
    }
}

pub fn maxwell_bracket(o: &SuiteOptions) -> Vec<Row> {
    let mut rows = vec![];
    for n in maxwell_dims(o) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let derived = sign * (n as f64 - 1.0);
        rows.push(Row::value(format!("maxwell_bracket.n{n}"), "{π,A} = (-1)^n (n-1) with π = ½ p^{A_αβ} ∂_α⨼∂_β⨼ω", derived, 1e-10, o.probes, || {
            let (c, res) = pi_a_constant(n, o.seed, o.probes)?;
            if res > 1e-10 {
                return Err(format!("{{π,A}} is not a constant multiple of ^s1: {res:e}").into());
            }
            Ok(c)
        }));
        let mut stated = Row::value(format!("maxwell_bracket.stated.n{n}"), "{π,A} = 2(-1)^n (n-1), the stated constant", 2.0 * derived, 1e-10, o.probes, || Ok(pi_a_constant(n, o.seed, o.probes)?.0));
        if !stated.passed() {
            stated.note = Some("documented deviation: the stated constant is twice the computed one".into());
        }
        rows.push(stated);
    }
    rows
}

pub fn maxwell_gauge(o: &SuiteOptions) -> Vec<Row> {
    maxwell_dims(o)
        .into_iter()
        .filter(|&n| n <= 3)
        .map(|n| {
            Row::residual(format!("maxwell_gauge.n{n}"), "{df∧π, A} = df and {df∧π, π} = 0", 1e-10, o.probes, || {
                let m = maxwell_system(&MaxwellParams { n, ..Default::default() })?;
                let mut d = Draw::new(o.seed.wrapping_add(n as u64));
                let f = d.base_coefficient(m.space()).mul(&d.base_coefficient(m.space()));
                let (with_a, with_pi) = m.gauge_brackets(&f)?;
                let pts = m.space().probe_points(o.seed, o.probes);
                Ok(with_a.max_abs_at(&pts)?.max(with_pi.max_abs_at(&pts)?))
            })
        })
        .collect()
}

pub fn maxwell_manufactured(o: &SuiteOptions) -> Vec<Row> {
    let cases: [(usize, &[&str]); 2] = [(2, &["0", "sin(x1)"]), (3, &["0", "sin(x1)*x3", "cos(x2)"])];
    let mut rows = vec![];
    for (n, a_text) in cases.into_iter().filter(|(n, _)| o.n.is_none_or(|m| m == *n)) {
        let run = move || -> R<([f64; 3], f64)> {
            let base = Chart::new(&(1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>())?.into_arc();
            let a: Vec<Expr> = a_text.iter().map(|t| parse(t, &base)).collect::<Result<_, _>>()?;
            let free = maxwell_system(&MaxwellParams { n, ..Default::default() })?;
            let current = free.manufactured_current(&a)?;
            let m = maxwell_system(&MaxwellParams { n, current: Some(current), ..Default::default() })?;
            Ok((m.graph_residuals(&a)?, free.graph_residuals(&a)?[0]))
        };
        let res = run().map_err(|e| e.to_string());
        let pick = |f: fn(&([f64; 3], f64)) -> f64| -> R<f64> { res.as_ref().map(f).map_err(|e| e.clone().into()) };
        rows.push(Row::residual(format!("maxwell_manufactured.dpi.n{n}"), "dπ = j on the graph of a manufactured potential", 1e-10, 50, || pick(|r| r.0[0])));
        rows.push(Row::residual(format!("maxwell_manufactured.da.n{n}"), "dA = Σ g g p^A dx∧dx = {Hω, A} on the graph", 1e-10, 50, || pick(|r| r.0[1].max(r.0[2]))));
        rows.push(Row::at_least(format!("maxwell_manufactured.unsourced.n{n}"), "dπ ≠ j when the source is dropped", 1e-2, 50, || pick(|r| r.1)));
    }
    rows
}

//! Legendre correspondence suite.

use std::error::Error;
use std::sync::Arc;

use super::{Row, SuiteOptions};
use crate::expr::{jet_gradient_error, Expr};
use crate::legendre::{generating_w, legendre_solve, pairing_jet, weyl_legendre, Lagrangian, LegendreHamiltonian, NewtonOptions};
use crate::phase::PhaseSpace;
use crate::probe;
use crate::systems::{scalar_field_system, string_system, ScalarFieldParams, StringParams};

type R<T> = Result<T, Box<dyn Error>>;

const QUARTIC: &str = "0.25*(v1_1^2 + v1_2^2)^2 + 0.5*(v1_1^2 + v1_2^2) + 0.3*v1_1*v1_2 - 0.2*cos(phi)";

/// Maximizer of `v ↦ p·v - L(v)` for the convex quartic toy Lagrangian by nested grid
/// refinement, `(v, max)`. Only function values of `L` are used.
pub fn quartic_grid_oracle(l: &Lagrangian, q: &[f64], p: &[f64]) -> R<(Vec<f64>, f64)> {
    let f = |v: &[f64]| -> R<f64> { Ok(p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - l.value(q, v)?) };
    let mut center = vec![0.0; p.len()];
    let mut half = 4.0;
    let steps = 20i32;
    let mut best = f(&center)?;
    for _ in 0..40 {
        let h = half / steps as f64;
        let mut arg = center.clone();
        for i in -steps..=steps {
            for j in -steps..=steps {
                let v = [center[0] + i as f64 * h, center[1] + j as f64 * h];
                let val = f(&v)?;
                if val > best {
                    best = val;
                    arg = v.to_vec();
                }
            }
        }
        center = arg;
        half = 2.0 * h;
    }
    Ok((center, best))
}

fn scalar_configs(o: &SuiteOptions) -> Vec<(usize, usize)> {
    o.configs(&[(1, 1), (2, 1), (2, 2), (3, 1)])
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

pub fn legendre(o: &SuiteOptions) -> Vec<Row> {
    let mut rows = vec![];
    let count = o.probes;
    for (n, k) in scalar_configs(o) {
        let params = move || ScalarFieldParams { n, k, potential: "0.3*y1^2 + 0.1*y1^4".into(), ..Default::default() };
        rows.push(Row::residual(format!("legendre.scalar_field.closed_form.n{n}k{k}"), "Newton-solved H equals ε + ½ g p p + V", 1e-9, count, || {
            let sys = scalar_field_system(&params())?;
            let lh = sys.system.legendre()?;
            let mut worst: f64 = 0.0;
            for pt in sys.space().probe_points(o.seed, count) {
                worst = worst.max(relative(lh.eval(&pt)?, sys.system.hamiltonian.eval(&pt)?));
            }
            Ok(worst)
        }));
        rows.push(Row::residual(format!("legendre.scalar_field.round_trip.n{n}k{k}"), "(q, v, w) -> (q, p) -> (q, v, H = w)", 1e-9, count, || {
            let sys = scalar_field_system(&params())?;
            let sp = sys.space();
            let l = &sys.system.lagrangian;
            let mut worst: f64 = 0.0;
            for (c, qv) in probe::points(o.seed, n + k + n * k + 1, count, -1.0, 1.0).into_iter().enumerate() {
                let (q, v, w) = (&qv[..n + k], &qv[n + k..n + k + n * k], qv[n + k + n * k]);
                let pt = weyl_legendre(l, sp, q, v, w)?;
                let start: Vec<f64> = if c % 2 == 0 { vec![0.0; n * k] } else { v.iter().map(|x| x + 0.3).collect() };
                let s = legendre_solve(l, sp, &pt, &start, &NewtonOptions::default())?;
                worst = worst.max(s.v.iter().zip(v).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
                worst = worst.max((generating_w(l, sp, &pt, &s.v)? - w).abs());
            }
            Ok(worst)
        }));
    }
    let string_params = || StringParams {
        k: 2,
        target: Some(vec![vec!["1+0.2*y1^2".into(), "0".into()], vec!["0".into(), "1".into()]]),
        b: Some(vec![vec!["0".into(), "0.4*y2".into()], vec!["-0.4*y2".into(), "0".into()]]),
        ..Default::default()
    };
    rows.push(Row::residual("legendre.string.closed_form", "Newton-solved H equals ε + ½ K p p on R", 1e-9, count, || {
        let s = string_system(&string_params())?;
        let lh = s.system.legendre()?;
        let mut worst: f64 = 0.0;
        for raw in s.space().probe_points(o.seed, count) {
            let pt = s.onto_r(&raw)?;
            worst = worst.max(relative(lh.eval(&pt)?, s.system.hamiltonian.eval(&pt)?));
        }
        Ok(worst)
    }));
    rows.push(Row::residual("legendre.string.round_trip", "(q, p) -> v -> ∂L/∂v reproduces p on R", 1e-9, count, || {
        let s = string_system(&string_params())?;
        let sp = s.space();
        let l = &s.system.lagrangian;
        let lh = s.system.legendre()?;
        let q_dim = sp.q_dim();
        let mut worst: f64 = 0.0;
        for raw in sp.probe_points(o.seed, count) {
            let pt = s.onto_r(&raw)?;
            let sol = lh.solve(&pt)?;
            let (_, grad, _) = pairing_jet(sp, &pt, &sol.v);
            let dl = l.grad_v(&pt[..q_dim], &sol.v)?;
            worst = worst.max(grad.iter().zip(&dl).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
        }
        Ok(worst)
    }));
    if o.outside {
        rows.push(Row::residual("legendre.string.outside_region", "Legendre solve at a point where M is singular", 1e-9, 1, || {
            let s = string_system(&StringParams::default())?;
            let mut pt = s.space().probe_points(o.seed, 1).remove(0);
            // b = 0 and a Euclidean base: M has the blocks [[1, ±p], [±p, 1]]
            let (c, sign) = s.p_ij_coordinate(0, 1);
            pt[c] = 1.0 / sign;
            let lh = s.system.legendre()?;
            let v = lh.eval(&pt)?;
            Ok((v - s.system.hamiltonian.eval(&pt)?).abs())
        }));
    }
    rows.push(Row::residual("legendre.quartic.newton_vs_grid", "Newton momenta inversion agrees with a grid search of p·v - L", 1e-4, count, || {
        let l = Lagrangian::parse(&["t", "x"], &["phi"], QUARTIC)?;
        let sp = PhaseSpace::weyl(2, 1)?;
        let mut worst: f64 = 0.0;
        for pt in sp.probe_points(o.seed, count.min(10)) {
            let p = [sp.p_weyl(0, 0).eval(&pt)?, sp.p_weyl(1, 0).eval(&pt)?];
            let s = legendre_solve(&l, &sp, &pt, &[0.0, 0.0], &NewtonOptions::default())?;
            let (v, best) = quartic_grid_oracle(&l, &pt[..3], &p)?;
            worst = worst.max(s.v.iter().zip(&v).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
            // H = ε + max_v (p·v - L)
            let (e, sign) = sp.eps();
            worst = worst.max((generating_w(&l, &sp, &pt, &s.v)? - sign * pt[e] - best).abs());
        }
        Ok(worst)
    }));
    rows.push(Row::residual("legendre.envelope_gradient", "∂H from the envelope formula matches central differences (relative)", 1e-5, count, || {
        let l = Arc::new(Lagrangian::parse(&["t", "x"], &["phi"], QUARTIC)?);
        let sp = Arc::new(PhaseSpace::weyl(2, 1)?);
        let h = LegendreHamiltonian::new(l, sp.clone())?;
        let s = string_system(&string_params())?;
        let jets = [s.system.hamiltonian.clone(), s.k_entry(0, 1, 1, 0), s.k_entry(1, 1, 1, 1)];
        let mut worst: f64 = 0.0;
        for pt in sp.probe_points(o.seed, count) {
            worst = worst.max(jet_gradient_error(&h, &pt, 1e-5)?);
        }
        for raw in s.space().probe_points(o.seed, count) {
            let pt = s.onto_r(&raw)?;
            for e in &jets {
                worst = worst.max(expr_gradient_error(e, &pt, 1e-5)?);
            }
        }
        Ok(worst)
    }));
    rows
}

/// Relative gap between `∂e/∂q^c` and central differences of `e`.
fn expr_gradient_error(e: &Expr, pt: &[f64], step: f64) -> R<f64> {
    let mut worst: f64 = 0.0;
    let mut probe = pt.to_vec();
    for c in 0..pt.len() {
        let h = step * pt[c].abs().max(1.0);
        probe[c] = pt[c] + h;
        let up = e.eval(&probe)?;
        probe[c] = pt[c] - h;
        let down = e.eval(&probe)?;
        probe[c] = pt[c];
        let fd = (up - down) / (2.0 * h);
        let g = e.derivative(c).eval(pt)?;
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1.0));
    }
    Ok(worst)
}

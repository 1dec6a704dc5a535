//! The Legendre correspondence between jets `(q, v)` and momenta `(q, p)`.
//!
//! A Lagrangian lives on a jet chart with coordinates `x.., y.., v{i}_{α}`
//! (1-based in the names, `v^i_α` at index `n + k + i n + α`). The pairing
//! `⟨p, z⟩ = Σ_I p_I det Z_I` and all its velocity derivatives come from
//! determinants of the tangent matrix with some columns replaced by unit
//! vectors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::chart::{Chart, ChartError};
use crate::expr::{parse, EvalError, Expr, OpaqueJet};
use crate::exterior::MultiIndex;
use crate::phase::{substituted_index, z_matrix, PhaseSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LegendreError {
    #[error("velocity Hessian is singular: condition number {cond:e}")]
    SingularHessian { cond: f64 },
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("shape: {0}")]
    Shape(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Newton settings for [`legendre_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_cond: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50, max_cond: 1e12 }
    }
}

/// `v^i_α` name on a jet chart.
pub fn velocity_name(i: usize, alpha: usize) -> String {
    format!("v{}_{}", i + 1, alpha + 1)
}

/// A Lagrangian `L(x, y, v)` with its symbolic first and second derivatives.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    n: usize,
    k: usize,
    chart: Arc<Chart>,
    expr: Expr,
    dq: Vec<Expr>,
    dv: Vec<Expr>,
    dvv: Vec<Expr>,
}

impl Lagrangian {
    pub fn jet_chart<S: AsRef<str>>(base: &[S], fiber: &[S]) -> Result<Arc<Chart>, LegendreError> {
        let (n, k) = (base.len(), fiber.len());
        let mut names: Vec<String> = base.iter().chain(fiber).map(|s| s.as_ref().to_string()).collect();
        for i in 0..k {
            for alpha in 0..n {
                names.push(velocity_name(i, alpha));
            }
        }
        Ok(Chart::new(&names)?.into_arc())
    }

    /// Parse `text` on the jet chart built from the given names.
    pub fn parse<S: AsRef<str>>(base: &[S], fiber: &[S], text: &str) -> Result<Self, LegendreError> {
        let chart = Self::jet_chart(base, fiber)?;
        let expr = parse(text, &chart).map_err(|e| LegendreError::Parse(e.to_string()))?;
        Self::from_expr(base.len(), fiber.len(), chart, expr)
    }

    pub fn from_expr(n: usize, k: usize, chart: Arc<Chart>, expr: Expr) -> Result<Self, LegendreError> {
        if chart.dim() != n + k + n * k {
            return Err(LegendreError::Shape(format!("jet chart has {} coordinates, expected {}", chart.dim(), n + k + n * k)));
        }
        let nv = n * k;
        let dq = (0..n + k).map(|c| expr.derivative(c)).collect();
        let dv: Vec<Expr> = (0..nv).map(|a| expr.derivative(n + k + a)).collect();
        let dvv = (0..nv * nv).map(|ab| dv[ab / nv].derivative(n + k + ab % nv)).collect();
        Ok(Lagrangian { n, k, chart, expr, dq, dv, dvv })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Symbolic `∂L/∂v^i_α`.
    pub fn dv_expr(&self, i: usize, alpha: usize) -> &Expr {
        &self.dv[i * self.n + alpha]
    }

    /// Symbolic `∂L/∂q^μ`.
    pub fn dq_expr(&self, mu: usize) -> &Expr {
        &self.dq[mu]
    }

    fn point(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        assert_eq!(q.len(), self.n + self.k);
        assert_eq!(v.len(), self.n * self.k);
        q.iter().chain(v).copied().collect()
    }

    pub fn value(&self, q: &[f64], v: &[f64]) -> Result<f64, EvalError> {
        self.expr.eval(&self.point(q, v))
    }

    pub fn grad_v(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        let pt = self.point(q, v);
        self.dv.iter().map(|e| e.eval(&pt)).collect()
    }

    pub fn grad_q(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        let pt = self.point(q, v);
        self.dq.iter().map(|e| e.eval(&pt)).collect()
    }

    pub fn hessian_v(&self, q: &[f64], v: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let pt = self.point(q, v);
        let nv = self.n * self.k;
        let mut h = DMatrix::zeros(nv, nv);
        for (ab, e) in self.dvv.iter().enumerate() {
            h[(ab / nv, ab % nv)] = e.eval(&pt)?;
        }
        Ok(h)
    }
}

/// `det Z_I` with the listed columns replaced by unit vectors along the given coordinates.
fn slot_det(z: &DMatrix<f64>, rows: &MultiIndex, repl: &[(usize, usize)]) -> f64 {
    let n = z.ncols();
    let mut m = DMatrix::from_fn(n, n, |r, c| z[(rows.get(r), c)]);
    for &(col, coord) in repl {
        for r in 0..n {
            m[(r, col)] = if rows.get(r) == coord { 1.0 } else { 0.0 };
        }
    }
    m.determinant()
}

/// `⟨p, z⟩` with its gradient and Hessian in the velocities (index `i n + α`).
pub fn pairing_jet(space: &PhaseSpace, pt: &[f64], v: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
    let (n, k) = (space.n(), space.k());
    let nv = n * k;
    let z = z_matrix(n, k, v);
    let mut val = 0.0;
    let mut grad = vec![0.0; nv];
    let mut hess = DMatrix::zeros(nv, nv);
    for (set, p) in space.canonical_values(pt) {
        val += p * slot_det(&z, &set, &[]);
        let fibers: Vec<usize> = set.iter().filter(|&c| c >= n).collect();
        if fibers.is_empty() {
            continue;
        }
        for i in 0..k {
            if !set.contains(n + i) {
                continue;
            }
            for alpha in 0..n {
                let a = i * n + alpha;
                grad[a] += p * slot_det(&z, &set, &[(alpha, n + i)]);
                if fibers.len() < 2 {
                    continue;
                }
                for j in 0..k {
                    if j == i || !set.contains(n + j) {
                        continue;
                    }
                    for beta in 0..n {
                        if beta != alpha {
                            hess[(a, j * n + beta)] += p * slot_det(&z, &set, &[(alpha, n + i), (beta, n + j)]);
                        }
                    }
                }
            }
        }
    }
    (val, grad, hess)
}

/// `W(q, v, p) = ⟨p, v⟩ - L(q, v)`.
pub fn generating_w(l: &Lagrangian, space: &PhaseSpace, pt: &[f64], v: &[f64]) -> Result<f64, EvalError> {
    let q = &pt[..space.q_dim()];
    Ok(pairing_jet(space, pt, v).0 - l.value(q, v)?)
}

/// Outcome of a converged Legendre solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreSolve {
    pub v: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Condition number of the velocity Hessian of `W` at the solution.
    pub condition: f64,
}

fn condition(j: &DMatrix<f64>) -> (f64, nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>) {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (cond, svd)
}

/// Solve `∂W/∂v = 0` for `v = V(q, p)` by Newton's method from `v0`.
pub fn legendre_solve(l: &Lagrangian, space: &PhaseSpace, pt: &[f64], v0: &[f64], opts: &NewtonOptions) -> Result<LegendreSolve, LegendreError> {
    if (l.n, l.k) != (space.n(), space.k()) {
        return Err(LegendreError::Shape("Lagrangian and phase space disagree on (n, k)".into()));
    }
    let q = &pt[..space.q_dim()];
    let mut v = v0.to_vec();
    for it in 0..=opts.max_iter {
        let (_, gp, hp) = pairing_jet(space, pt, &v);
        let gl = l.grad_v(q, &v)?;
        let r = DVector::from_iterator(gp.len(), gp.iter().zip(&gl).map(|(a, b)| a - b));
        let residual = r.amax();
        let jac = hp - l.hessian_v(q, &v)?;
        let (cond, svd) = condition(&jac);
        if !residual.is_finite() {
            return Err(EvalError::NonFinite.into());
        }
        if residual <= opts.tol {
            if !(cond <= opts.max_cond) {
                return Err(LegendreError::SingularHessian { cond });
            }
            log::debug!("Legendre solve: {it} steps, Hessian condition {cond:e}");
            return Ok(LegendreSolve { v, iterations: it, residual, condition: cond });
        }
        if it == opts.max_iter {
            return Err(LegendreError::NoConvergence { iterations: it, residual });
        }
        if !(cond <= opts.max_cond) {
            return Err(LegendreError::SingularHessian { cond });
        }
        let step = svd.solve(&r, 0.0).map_err(|e| LegendreError::Shape(e.to_string()))?;
        for (vi, s) in v.iter_mut().zip(step.iter()) {
            *vi -= s;
        }
    }
    unreachable!()
}

/// Weyl momenta of a jet: `p^α_i = ∂L/∂v^i_α`, `ε = w + L - Σ p^α_i v^i_α`.
///
/// Returns a chart point on `space`; components with two or more fiber slots are zero.
pub fn weyl_legendre(l: &Lagrangian, space: &PhaseSpace, q: &[f64], v: &[f64], w: f64) -> Result<Vec<f64>, EvalError> {
    let (n, k) = (space.n(), space.k());
    let lv = l.value(q, v)?;
    let dv = l.grad_v(q, v)?;
    let mut canon: Vec<(MultiIndex, f64)> = Vec::new();
    let pv: f64 = dv.iter().zip(v).map(|(a, b)| a * b).sum();
    canon.push((MultiIndex::from_sorted(&(0..n).collect::<Vec<_>>()), w + lv - pv));
    for i in 0..k {
        for alpha in 0..n {
            let (set, s) = substituted_index(n, &[alpha], &[i]).expect("distinct");
            canon.push((set, s * dv[i * n + alpha]));
        }
    }
    let mut pt = q.to_vec();
    for m in 0..space.momentum_count() {
        let (set, s) = &space.embedding(m)[0];
        pt.push(canon.iter().find(|(c, _)| c == set).map_or(0.0, |(_, val)| s * val));
    }
    Ok(pt)
}

/// `S^α_β = δ^α_β L - Σ_i ∂L/∂v^i_α v^i_β` as an `n × n` matrix indexed `(α, β)`.
pub fn stress_energy(l: &Lagrangian, q: &[f64], v: &[f64]) -> Result<DMatrix<f64>, EvalError> {
    let (n, k) = (l.n, l.k);
    let lv = l.value(q, v)?;
    let dv = l.grad_v(q, v)?;
    Ok(DMatrix::from_fn(n, n, |a, b| {
        let kin: f64 = (0..k).map(|i| dv[i * n + a] * v[i * n + b]).sum();
        if a == b {
            lv - kin
        } else {
            -kin
        }
    }))
}

/// `H^α_β = δ^α_β H - ⟨p, z with z_α replaced by ∂_β⟩` at the tangent `Z(v)`.
pub fn hamiltonian_tensor_at(space: &PhaseSpace, pt: &[f64], v: &[f64], h: f64) -> DMatrix<f64> {
    let (n, k) = (space.n(), space.k());
    let z = z_matrix(n, k, v);
    let canon = space.canonical_values(pt);
    DMatrix::from_fn(n, n, |a, b| {
        let pair: f64 = canon.iter().map(|(set, p)| p * slot_det(&z, set, &[(a, b)])).sum();
        if a == b {
            h - pair
        } else {
            -pair
        }
    })
}

/// `H(q, p) = W(q, V(q, p), p)` with envelope gradients.
#[derive(Debug)]
pub struct LegendreHamiltonian {
    lagrangian: Arc<Lagrangian>,
    space: Arc<PhaseSpace>,
    v0: Vec<f64>,
    opts: NewtonOptions,
    name: String,
}

impl LegendreHamiltonian {
    pub fn new(lagrangian: Arc<Lagrangian>, space: Arc<PhaseSpace>) -> Result<Self, LegendreError> {
        if (lagrangian.n, lagrangian.k) != (space.n(), space.k()) {
            return Err(LegendreError::Shape("Lagrangian and phase space disagree on (n, k)".into()));
        }
        let nv = space.n() * space.k();
        Ok(LegendreHamiltonian { lagrangian, space, v0: vec![0.0; nv], opts: NewtonOptions::default(), name: "H".into() })
    }

    pub fn with_start(mut self, v0: Vec<f64>) -> Self {
        assert_eq!(v0.len(), self.v0.len());
        self.v0 = v0;
        self
    }

    pub fn with_options(mut self, opts: NewtonOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn space(&self) -> &Arc<PhaseSpace> {
        &self.space
    }

    pub fn lagrangian(&self) -> &Arc<Lagrangian> {
        &self.lagrangian
    }

    pub fn solve(&self, pt: &[f64]) -> Result<LegendreSolve, LegendreError> {
        legendre_solve(&self.lagrangian, &self.space, pt, &self.v0, &self.opts)
    }

    pub fn eval(&self, pt: &[f64]) -> Result<f64, LegendreError> {
        let s = self.solve(pt)?;
        Ok(generating_w(&self.lagrangian, &self.space, pt, &s.v)?)
    }

    /// `∂H/∂q^μ = -∂L/∂q^μ` and `∂H/∂P_m = Σ_{(I,s)} s det Z_I`.
    pub fn envelope_gradient(&self, pt: &[f64]) -> Result<Vec<f64>, LegendreError> {
        let s = self.solve(pt)?;
        let sp = &self.space;
        let q = &pt[..sp.q_dim()];
        let mut g: Vec<f64> = self.lagrangian.grad_q(q, &s.v)?.iter().map(|x| -x).collect();
        let z = z_matrix(sp.n(), sp.k(), &s.v);
        for m in 0..sp.momentum_count() {
            g.push(sp.embedding(m).iter().map(|(set, sign)| sign * slot_det(&z, set, &[])).sum());
        }
        Ok(g)
    }

    pub fn tensor(&self, pt: &[f64]) -> Result<DMatrix<f64>, LegendreError> {
        let s = self.solve(pt)?;
        let h = generating_w(&self.lagrangian, &self.space, pt, &s.v)?;
        Ok(hamiltonian_tensor_at(&self.space, pt, &s.v, h))
    }

    /// The Hamiltonian as an expression on the phase chart.
    pub fn into_expr(self) -> Expr {
        Expr::jet(Arc::new(self))
    }
}

fn jet_err(name: &str, e: LegendreError) -> EvalError {
    match e {
        LegendreError::Eval(e) => e,
        other => EvalError::Jet { name: name.to_string(), detail: other.to_string() },
    }
}

impl OpaqueJet for LegendreHamiltonian {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, pt: &[f64]) -> Result<f64, EvalError> {
        self.eval(pt).map_err(|e| jet_err(&self.name, e))
    }

    fn gradient(&self, pt: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.envelope_gradient(pt).map_err(|e| jet_err(&self.name, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::jet_gradient_error;

    fn kg() -> Lagrangian {
        Lagrangian::parse(&["t", "x"], &["phi"], "0.5*(v1_1^2 - v1_2^2) - 0.5*phi^2").unwrap()
    }

    #[test]
    fn pairing_examples() {
        let w = PhaseSpace::weyl(1, 1).unwrap();
        assert_eq!(pairing_jet(&w, &[0.0, 0.0, 0.0, 0.0], &[0.0]).0, 0.0);
        let sp = PhaseSpace::weyl(2, 1).unwrap();
        // eps = 1, p^1_1 = 2, v^1_1 = 3
        let mut pt = vec![0.0; sp.dim()];
        pt[sp.eps().0] = 1.0;
        let p11 = sp.p_weyl(0, 0);
        let c = *p11.variables().iter().next().unwrap();
        pt[c] = 2.0 * p11.eval(&{
            let mut e = vec![0.0; sp.dim()];
            e[c] = 1.0;
            e
        })
        .unwrap();
        assert!((pairing_jet(&sp, &pt, &[3.0, 0.0]).0 - 7.0).abs() < 1e-14);
    }

    #[test]
    fn full_chart_pairing_has_two_by_two_minor() {
        let sp = PhaseSpace::full(2, 2).unwrap();
        let set = MultiIndex::from_sorted(&[2, 3]);
        let (c, s) = sp.canonical_weights(&set)[0];
        let mut pt = vec![0.0; sp.dim()];
        pt[c] = s;
        let v = [0.3, -1.2, 0.7, 2.0];
        let (val, grad, hess) = pairing_jet(&sp, &pt, &v);
        let minor = v[0] * v[3] - v[1] * v[2];
        assert!((val - minor).abs() < 1e-14);
        assert!((grad[0] - v[3]).abs() < 1e-14 && (grad[1] + v[2]).abs() < 1e-14);
        assert!((hess[(0, 3)] - 1.0).abs() < 1e-14 && (hess[(1, 2)] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn flat_scalar_field_round_trip() {
        let l = kg();
        let sp = PhaseSpace::weyl(2, 1).unwrap();
        let q = [0.2, -0.4, 0.7];
        let v = [1.3, -0.6];
        let pt = weyl_legendre(&l, &sp, &q, &v, 0.0).unwrap();
        // p^0 = φ_t, p^1 = -φ_x
        assert!((sp.p_weyl(0, 0).eval(&pt).unwrap() - 1.3).abs() < 1e-14);
        assert!((sp.p_weyl(1, 0).eval(&pt).unwrap() - 0.6).abs() < 1e-14);
        let s = legendre_solve(&l, &sp, &pt, &[0.0, 0.0], &NewtonOptions::default()).unwrap();
        assert!(s.iterations <= 2);
        assert!((s.v[0] - v[0]).abs() < 1e-12 && (s.v[1] - v[1]).abs() < 1e-12);
        // w = 0 gauge gives H = 0
        assert!(generating_w(&l, &sp, &pt, &s.v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_tensor_is_minus_stress_energy() {
        let l = Lagrangian::parse(&["t", "x"], &["a", "b"], "0.5*(v1_1^2 - v1_2^2) + 0.5*(v2_1^2 - 2*v2_2^2) + v1_1*v2_2 - a^2*b").unwrap();
        let sp = PhaseSpace::weyl(2, 2).unwrap();
        let q = [0.1, 0.2, 0.3, -0.5];
        let v = [0.4, -0.2, 1.1, 0.6];
        let pt = weyl_legendre(&l, &sp, &q, &v, 0.7).unwrap();
        let h = generating_w(&l, &sp, &pt, &v).unwrap();
        assert!((h - 0.7).abs() < 1e-12);
        let ht = hamiltonian_tensor_at(&sp, &pt, &v, h);
        let s = stress_energy(&l, &q, &v).unwrap();
        assert!((ht + s).amax() < 1e-12);
    }

    #[test]
    fn envelope_gradient_matches_finite_differences() {
        let l = Arc::new(Lagrangian::parse(&["t", "x"], &["phi"], "0.5*(v1_1^2 - v1_2^2) + 0.1*v1_1^4 - cos(phi)*x").unwrap());
        let sp = Arc::new(PhaseSpace::weyl(2, 1).unwrap());
        let h = LegendreHamiltonian::new(l.clone(), sp.clone()).unwrap();
        for pt in sp.probe_points(11, 10) {
            let g = h.envelope_gradient(&pt).unwrap();
            assert!((g[sp.eps().0] - 1.0).abs() < 1e-12);
            assert!(jet_gradient_error(&h, &pt, 1e-5).unwrap() < 1e-6);
        }
    }

    #[test]
    fn quartic_needs_a_nonzero_start() {
        let l = Lagrangian::parse(&["x"], &["y"], "0.25*v1_1^4").unwrap();
        let sp = PhaseSpace::weyl(1, 1).unwrap();
        let pt = [0.0, 0.0, 0.0, 2.0];
        let opts = NewtonOptions::default();
        assert!(matches!(legendre_solve(&l, &sp, &pt, &[0.0], &opts), Err(LegendreError::SingularHessian { .. })));
        let s = legendre_solve(&l, &sp, &pt, &[1.0], &opts).unwrap();
        assert!((s.v[0] - 2f64.cbrt()).abs() < 1e-10);
    }

    #[test]
    fn newton_gives_up_after_max_iterations() {
        let l = Lagrangian::parse(&["x"], &["y"], "0.25*v1_1^4").unwrap();
        let sp = PhaseSpace::weyl(1, 1).unwrap();
        let opts = NewtonOptions { max_iter: 2, ..Default::default() };
        let r = legendre_solve(&l, &sp, &[0.0, 0.0, 0.0, 50.0], &[1.0], &opts);
        assert!(matches!(r, Err(LegendreError::NoConvergence { iterations: 2, .. })));
    }
}

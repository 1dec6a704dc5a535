//! The example systems: interacting scalar fields, the conformal string and
//! the electromagnetic field, each with chart, Lagrangian and Hamiltonian.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brackets::observables;
use crate::brackets::{max_abs_at, Algebra, SuperForm};
use crate::chart::Chart;
use crate::expr::{parse, EvalError, Expr, OpaqueJet};
use crate::exterior::{Form, MultiIndex};
use crate::legendre::{velocity_name, Lagrangian, LegendreError, LegendreHamiltonian};
use crate::phase::{PhaseError, PhaseKind, PhaseSpace, PhaseSpec};
use crate::probe;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("unknown system `{0}`")]
    Unknown(String),
    #[error("parameters: {0}")]
    Params(String),
    #[error("metric is singular at x = {point:?}")]
    MetricSingular { point: Vec<f64> },
    #[error("metric is not symmetric in entries ({0}, {1})")]
    MetricNotSymmetric(usize, usize),
    #[error("current is not conserved: |dj| = {residual:e}")]
    CurrentNotConserved { residual: f64 },
    #[error("the naive Maxwell Hamiltonian gives wrong field equations; pass allow_naive to use it anyway")]
    NaiveMaxwell,
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Legendre(#[from] LegendreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn parse_on(text: &str, chart: &Chart) -> Result<Expr, SystemError> {
    parse(text, chart).map_err(|e| SystemError::Params(format!("`{text}`: {e}")))
}

fn parse_matrix(rows: &[Vec<String>], chart: &Chart) -> Result<Vec<Vec<Expr>>, SystemError> {
    rows.iter().map(|r| r.iter().map(|t| parse_on(t, chart)).collect()).collect()
}

/// Determinant by cofactor expansion along the first row.
pub fn sym_det(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        n => {
            let mut acc = Expr::zero();
            for c in 0..n {
                if m[0][c].is_zero() {
                    continue;
                }
                let term = m[0][c].mul(&sym_det(&minor(m, 0, c)));
                acc = if c % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(r, _)| *r != row)
        .map(|(_, rw)| rw.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// Inverse through the adjugate.
pub fn sym_inverse(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = m.len();
    let det = sym_det(m);
    if n == 1 {
        return vec![vec![Expr::one().div(&det)]];
    }
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let cof = sym_det(&minor(m, c, r));
                    let cof = if (r + c) % 2 == 0 { cof } else { cof.neg() };
                    cof.div(&det)
                })
                .collect()
        })
        .collect()
}

fn default_metric(n: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|a| (0..n).map(|b| if a != b { "0" } else if a == 0 { "1" } else { "-1" }.to_string()).collect())
        .collect()
}

fn check_metric(metric: &[Vec<String>], base: &[String]) -> Result<String, SystemError> {
    let n = base.len();
    if metric.len() != n || metric.iter().any(|r| r.len() != n) {
        return Err(SystemError::Params(format!("metric must be {n} x {n}")));
    }
    let chart = Chart::new(base).map_err(|e| SystemError::Params(e.to_string()))?;
    let g = parse_matrix(metric, &chart)?;
    let pts = probe::points(0x3e7, n, 50, -1.0, 1.0);
    for a in 0..n {
        for b in a + 1..n {
            let d = g[a][b].sub(&g[b][a]);
            if pts.iter().any(|p| d.eval(p).map_or(true, |v| v.abs() > 1e-12)) {
                return Err(SystemError::MetricNotSymmetric(a, b));
            }
        }
    }
    let det = sym_det(&g);
    for p in &pts {
        if det.eval(p)?.abs() < 1e-12 {
            return Err(SystemError::MetricSingular { point: p.clone() });
        }
    }
    let sign = if det.eval(&pts[0])? < 0.0 { -1.0 } else { 1.0 };
    Ok(match det.as_const() {
        Some(c) => format!("{}", c.abs().sqrt()),
        None if sign > 0.0 => format!("sqrt({})", det.print(&chart)),
        None => format!("sqrt(-({}))", det.print(&chart)),
    })
}

fn names_or(given: &Option<Vec<String>>, prefix: &str, count: usize) -> Vec<String> {
    given.clone().unwrap_or_else(|| (1..=count).map(|i| format!("{prefix}{i}")).collect())
}

/// Chart, Lagrangian and Hamiltonian of one system.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    pub name: String,
    pub space: Arc<PhaseSpace>,
    pub lagrangian: Arc<Lagrangian>,
    /// `H` on the phase chart; a closed form or an opaque jet.
    pub hamiltonian: Expr,
    pub legendre_start: Vec<f64>,
}

impl HamiltonianSystem {
    /// `H` through the numerical Legendre transform of the Lagrangian.
    pub fn legendre(&self) -> Result<LegendreHamiltonian, LegendreError> {
        Ok(LegendreHamiltonian::new(self.lagrangian.clone(), self.space.clone())?.with_start(self.legendre_start.clone()))
    }

    pub fn algebra(&self) -> Algebra<'_> {
        Algebra::new(&self.space)
    }

    pub fn h_omega(&self) -> Form {
        self.space.volume().scale(&self.hamiltonian)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarFieldParams {
    pub n: usize,
    pub k: usize,
    pub metric: Option<Vec<Vec<String>>>,
    pub potential: String,
    pub base: Option<Vec<String>>,
    pub fiber: Option<Vec<String>>,
}

impl Default for ScalarFieldParams {
    fn default() -> Self {
        ScalarFieldParams { n: 2, k: 1, metric: None, potential: "0.5*y1^2".into(), base: None, fiber: None }
    }
}

/// `L = ½ g^{αβ} ∂_αφ^i ∂_βφ^i - V(φ)`, `H = ε + ½ g_{αβ} p^α_i p^β_i + V(φ)`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub params: ScalarFieldParams,
    pub system: HamiltonianSystem,
    /// `g_{αβ}` on the phase chart.
    pub metric: Vec<Vec<Expr>>,
    pub inverse: Vec<Vec<Expr>>,
    pub potential: Expr,
}

pub fn scalar_field_system(params: &ScalarFieldParams) -> Result<ScalarField, SystemError> {
    let (n, k) = (params.n, params.k);
    let base = names_or(&params.base, "x", n);
    let fiber = names_or(&params.fiber, "y", k);
    let metric_text = params.metric.clone().unwrap_or_else(|| default_metric(n));
    let density = check_metric(&metric_text, &base)?;
    let space = Arc::new(PhaseSpec::new(PhaseKind::Weyl, n, k).base_names(&refs(&base)).fiber_names(&refs(&fiber)).density(&density).build()?);
    let chart = space.chart();
    let metric = parse_matrix(&metric_text, chart)?;
    let inverse = sym_inverse(&metric);
    let potential = parse_on(&params.potential, chart)?;
    let (eps, _) = space.eps();
    let mut h = Expr::var(eps).add(&potential);
    for i in 0..k {
        for a in 0..n {
            for b in 0..n {
                h = h.add(&metric[a][b].mul(&space.p_weyl(a, i)).mul(&space.p_weyl(b, i)).scale(0.5));
            }
        }
    }
    let jet = Lagrangian::jet_chart(&base, &fiber)?;
    let ginv = sym_inverse(&parse_matrix(&metric_text, &jet)?);
    let mut l = parse_on(&params.potential, &jet)?.neg();
    for i in 0..k {
        for a in 0..n {
            for b in 0..n {
                let va = Expr::var(n + k + i * n + a);
                let vb = Expr::var(n + k + i * n + b);
                l = l.add(&ginv[a][b].mul(&va).mul(&vb).scale(0.5));
            }
        }
    }
    let lagrangian = Arc::new(Lagrangian::from_expr(n, k, jet, l)?);
    Ok(ScalarField {
        params: params.clone(),
        system: HamiltonianSystem { name: "scalar_field".into(), space, lagrangian, hamiltonian: h, legendre_start: vec![0.0; n * k] },
        metric,
        inverse,
        potential,
    })
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

impl ScalarField {
    pub fn space(&self) -> &PhaseSpace {
        &self.system.space
    }

    /// `P_{i,f} = f ∂_{φ^i} ⨼ θ`.
    pub fn momentum(&self, i: usize, f: &Expr) -> Form {
        observables::momentum(self.space(), self.space().y(i), f)
    }

    /// `(1/g) ∂_α(g g^{αβ} ∂_β φ^i) + ∂V/∂φ^i` for fields `φ(x)` given on the phase chart,
    /// assembled from the two Hamilton equations.
    pub fn euler_lagrange(&self, phi: &[Expr]) -> Result<Vec<Expr>, SystemError> {
        let sp = self.space();
        let (n, k) = (sp.n(), sp.k());
        let g = sp.density();
        let mut map: Vec<Expr> = (0..sp.dim()).map(Expr::var).collect();
        for (i, f) in phi.iter().enumerate() {
            map[sp.y(i)] = f.clone();
        }
        (0..k)
            .map(|i| {
                let mut div = Expr::zero();
                for a in 0..n {
                    let mut p = Expr::zero();
                    for b in 0..n {
                        p = p.add(&self.inverse[a][b].mul(&phi[i].derivative(b)));
                    }
                    div = div.add(&g.mul(&p).derivative(a));
                }
                let dv = self.potential.derivative(sp.y(i)).substitute(&map).map_err(|e| SystemError::Params(e.to_string()))?;
                Ok(div.div(&g).add(&dv))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StringParams {
    pub k: usize,
    pub metric: Option<Vec<Vec<String>>>,
    /// Target metric `h_{ij}(y)`.
    pub target: Option<Vec<Vec<String>>>,
    /// Two-form `b_{ij}(y)`; antisymmetric.
    pub b: Option<Vec<Vec<String>>>,
    pub base: Option<Vec<String>>,
    pub fiber: Option<Vec<String>>,
}

impl Default for StringParams {
    fn default() -> Self {
        StringParams { k: 2, metric: None, target: None, b: None, base: None, fiber: None }
    }
}

fn eye(k: usize) -> Vec<Vec<String>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { "1" } else { "0" }.to_string()).collect()).collect()
}

fn zeros(k: usize) -> Vec<Vec<String>> {
    vec![vec!["0".to_string(); k]; k]
}

const EPS2: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];

/// Shared data behind the string Hamiltonian and the entries of `K = M⁻¹`.
#[derive(Debug)]
pub struct StringData {
    k: usize,
    /// `M^{αβ}_{ij}` at row `2i + α`, column `2j + β`.
    m: Vec<Expr>,
    dm: Vec<Vec<Expr>>,
    p: Vec<Expr>,
    dp: Vec<Vec<f64>>,
    eps: usize,
    dim: usize,
}

impl StringData {
    fn size(&self) -> usize {
        2 * self.k
    }

    pub fn m_at(&self, pt: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let s = self.size();
        let mut out = DMatrix::zeros(s, s);
        for (e, expr) in self.m.iter().enumerate() {
            out[(e / s, e % s)] = expr.eval(pt)?;
        }
        Ok(out)
    }

    pub fn k_at(&self, pt: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let m = self.m_at(pt)?;
        let svd = m.clone().svd(false, false);
        let cond = svd.singular_values.max() / svd.singular_values.min();
        if !(cond < 1e12) {
            return Err(EvalError::Jet { name: "K".into(), detail: format!("M is singular (condition {cond:e}); point outside O") });
        }
        m.try_inverse().ok_or(EvalError::Jet { name: "K".into(), detail: "M is singular".into() })
    }

    fn dm_at(&self, pt: &[f64], c: usize) -> Result<DMatrix<f64>, EvalError> {
        let s = self.size();
        let mut out = DMatrix::zeros(s, s);
        for (e, expr) in self.dm[c].iter().enumerate() {
            if !expr.is_zero() {
                out[(e / s, e % s)] = expr.eval(pt)?;
            }
        }
        Ok(out)
    }

    fn p_at(&self, pt: &[f64]) -> Result<nalgebra::DVector<f64>, EvalError> {
        let vals: Result<Vec<f64>, EvalError> = self.p.iter().map(|e| e.eval(pt)).collect();
        Ok(nalgebra::DVector::from_vec(vals?))
    }
}

/// `H = ε + ½ K^{ij}_{αβ} p^α_i p^β_j` with `∂K = -K (∂M) K`.
#[derive(Debug)]
pub struct StringHamiltonian(pub Arc<StringData>);

impl OpaqueJet for StringHamiltonian {
    fn name(&self) -> &str {
        "H_string"
    }

    fn value(&self, pt: &[f64]) -> Result<f64, EvalError> {
        let d = &self.0;
        let kk = d.k_at(pt)?;
        let p = d.p_at(pt)?;
        Ok(pt[d.eps] + 0.5 * p.dot(&(&kk * &p)))
    }

    fn gradient(&self, pt: &[f64]) -> Result<Vec<f64>, EvalError> {
        let d = &self.0;
        let kk = d.k_at(pt)?;
        let p = d.p_at(pt)?;
        let v = &kk * &p;
        (0..d.dim)
            .map(|c| {
                let mut g = if c == d.eps { 1.0 } else { 0.0 };
                g += d.dp[c].iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
                if d.dm[c].iter().any(|e| !e.is_zero()) {
                    g -= 0.5 * v.dot(&(d.dm_at(pt, c)? * &v));
                }
                Ok(g)
            })
            .collect()
    }
}

/// One entry `K^{ij}_{αβ}` of the inverse of `M`.
#[derive(Debug)]
pub struct KEntry {
    data: Arc<StringData>,
    row: usize,
    col: usize,
    name: String,
}

impl OpaqueJet for KEntry {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, pt: &[f64]) -> Result<f64, EvalError> {
        Ok(self.data.k_at(pt)?[(self.row, self.col)])
    }

    fn gradient(&self, pt: &[f64]) -> Result<Vec<f64>, EvalError> {
        let kk = self.data.k_at(pt)?;
        (0..self.data.dim)
            .map(|c| {
                if self.data.dm[c].iter().all(Expr::is_zero) {
                    return Ok(0.0);
                }
                Ok(-(&kk * self.data.dm_at(pt, c)? * &kk)[(self.row, self.col)])
            })
            .collect()
    }
}

/// Maps `u: X → Y` with `L = ½ G^{αβ}_{ij} v^i_α v^j_β`, `G = h g^{αβ} + b ε^{αβ}/g`.
#[derive(Debug, Clone)]
pub struct StringSystem {
    pub params: StringParams,
    pub system: HamiltonianSystem,
    pub data: Arc<StringData>,
    /// `G^{αβ}_{ij}` on the phase chart, same layout as `M`.
    pub g_tensor: Vec<Expr>,
}

pub fn string_system(params: &StringParams) -> Result<StringSystem, SystemError> {
    let k = params.k;
    let base = names_or(&params.base, "x", 2);
    let fiber = names_or(&params.fiber, "y", k);
    let metric_text = params.metric.clone().unwrap_or_else(|| default_metric(2).into_iter().map(|r| r.into_iter().map(|s| s.replace("-1", "1")).collect()).collect());
    let h_text = params.target.clone().unwrap_or_else(|| eye(k));
    let b_text = params.b.clone().unwrap_or_else(|| zeros(k));
    if h_text.len() != k || b_text.len() != k || h_text.iter().chain(&b_text).any(|r| r.len() != k) {
        return Err(SystemError::Params(format!("target metric and b must be {k} x {k}")));
    }
    let density = check_metric(&metric_text, &base)?;
    let space = Arc::new(PhaseSpec::new(PhaseKind::Full, 2, k).base_names(&refs(&base)).fiber_names(&refs(&fiber)).density(&density).build()?);
    let chart = space.chart().clone();

    let build_g = |chart: &Chart, g: &Expr| -> Result<Vec<Expr>, SystemError> {
        let gm = parse_matrix(&metric_text, chart)?;
        let ginv = sym_inverse(&gm);
        let h = parse_matrix(&h_text, chart)?;
        let b = parse_matrix(&b_text, chart)?;
        let mut out = Vec::with_capacity(4 * k * k);
        for i in 0..k {
            for a in 0..2 {
                for j in 0..k {
                    for bb in 0..2 {
                        let mut e = h[i][j].mul(&ginv[a][bb]);
                        if EPS2[a][bb] != 0.0 {
                            e = e.add(&b[i][j].div(g).scale(EPS2[a][bb]));
                        }
                        out.push(e);
                    }
                }
            }
        }
        Ok(out)
    };
    {
        let b = parse_matrix(&b_text, &chart)?;
        let pts = probe::points(0x51, chart.dim(), 20, -1.0, 1.0);
        for i in 0..k {
            for j in 0..k {
                let s = b[i][j].add(&b[j][i]);
                if pts.iter().any(|p| s.eval(p).map_or(true, |v| v.abs() > 1e-12)) {
                    return Err(SystemError::Params("b must be antisymmetric".into()));
                }
            }
        }
    }
    let g_tensor = build_g(&chart, &space.density())?;
    let s = 2 * k;
    let p_ij = |i: usize, j: usize| -> Expr {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Expr::zero(),
            std::cmp::Ordering::Less => space.canonical_momentum(&MultiIndex::from_sorted(&[2 + i, 2 + j])),
            std::cmp::Ordering::Greater => space.canonical_momentum(&MultiIndex::from_sorted(&[2 + j, 2 + i])).neg(),
        }
    };
    let mut m = g_tensor.clone();
    for i in 0..k {
        for a in 0..2 {
            for j in 0..k {
                for bb in 0..2 {
                    if EPS2[a][bb] != 0.0 {
                        let e = (2 * i + a) * s + 2 * j + bb;
                        m[e] = m[e].sub(&p_ij(i, j).scale(EPS2[a][bb]));
                    }
                }
            }
        }
    }
    let dim = space.dim();
    let dm: Vec<Vec<Expr>> = (0..dim).map(|c| m.iter().map(|e| e.derivative(c)).collect()).collect();
    let p: Vec<Expr> = (0..k).flat_map(|i| (0..2).map(move |a| (i, a))).map(|(i, a)| space.p_weyl(a, i)).collect();
    let dp: Vec<Vec<f64>> = (0..dim).map(|c| p.iter().map(|e| e.derivative(c).as_const().unwrap_or(0.0)).collect()).collect();
    let data = Arc::new(StringData { k, m, dm, p, dp, eps: space.eps().0, dim });
    let hamiltonian = Expr::jet(Arc::new(StringHamiltonian(data.clone())));

    let jet = Lagrangian::jet_chart(&base, &fiber)?;
    let g_jet = parse_on(&density, &jet)?;
    let gt = build_g(&jet, &g_jet)?;
    let mut l = Expr::zero();
    for (e, coef) in gt.iter().enumerate() {
        let (r, c) = (e / s, e % s);
        let (i, a, j, bb) = (r / 2, r % 2, c / 2, c % 2);
        let vi = Expr::var(2 + k + i * 2 + a);
        let vj = Expr::var(2 + k + j * 2 + bb);
        l = l.add(&coef.mul(&vi).mul(&vj).scale(0.5));
    }
    let lagrangian = Arc::new(Lagrangian::from_expr(2, k, jet, l)?);
    Ok(StringSystem {
        params: params.clone(),
        system: HamiltonianSystem { name: "string".into(), space, lagrangian, hamiltonian, legendre_start: vec![0.0; 2 * k] },
        data,
        g_tensor,
    })
}

impl StringSystem {
    pub fn space(&self) -> &PhaseSpace {
        &self.system.space
    }

    pub fn m_matrix(&self, pt: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        self.data.m_at(pt)
    }

    pub fn k_matrix(&self, pt: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        self.data.k_at(pt)
    }

    /// `K^{ij}_{αβ}` as an opaque expression.
    pub fn k_entry(&self, i: usize, alpha: usize, j: usize, beta: usize) -> Expr {
        Expr::jet(Arc::new(KEntry {
            data: self.data.clone(),
            row: 2 * i + alpha,
            col: 2 * j + beta,
            name: format!("K{}{}_{}{}", i + 1, j + 1, alpha + 1, beta + 1),
        }))
    }

    /// Coordinate of `p_{ij}` (`i < j`) with its sign.
    pub fn p_ij_coordinate(&self, i: usize, j: usize) -> (usize, f64) {
        self.space().canonical_weights(&MultiIndex::from_sorted(&[2 + i, 2 + j]))[0]
    }

    /// Move a point onto `R = {g p_{ij} = b_{ij}}` by resetting the `p_{ij}`.
    pub fn onto_r(&self, pt: &[f64]) -> Result<Vec<f64>, SystemError> {
        let sp = self.space();
        let g = sp.density().eval(pt)?;
        let b = parse_matrix(&self.params.b.clone().unwrap_or_else(|| zeros(self.data.k)), sp.chart())?;
        let mut out = pt.to_vec();
        for i in 0..self.data.k {
            for j in i + 1..self.data.k {
                let (c, s) = self.p_ij_coordinate(i, j);
                out[c] = s * b[i][j].eval(pt)? / g;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxwellParams {
    pub n: usize,
    pub metric: Option<Vec<Vec<String>>>,
    /// `j^α(x)`; must satisfy `d(j^α ω_α) = 0`.
    pub current: Option<Vec<String>>,
    pub base: Option<Vec<String>>,
}

impl Default for MaxwellParams {
    fn default() -> Self {
        MaxwellParams { n: 2, metric: None, current: None, base: None }
    }
}

/// `A = A_α dx^α` with momenta `p^{A_αβ}` stored for `α < β` only.
#[derive(Debug, Clone)]
pub struct MaxwellSystem {
    pub params: MaxwellParams,
    pub system: HamiltonianSystem,
    pub metric: Vec<Vec<Expr>>,
    pub current: Vec<Expr>,
}

pub fn maxwell_system(params: &MaxwellParams) -> Result<MaxwellSystem, SystemError> {
    let n = params.n;
    if n < 2 {
        return Err(SystemError::Params("Maxwell needs n >= 2".into()));
    }
    let base = names_or(&params.base, "x", n);
    let fiber: Vec<String> = (1..=n).map(|i| format!("A{i}")).collect();
    let metric_text = params.metric.clone().unwrap_or_else(|| default_metric(n));
    let current_text = params.current.clone().unwrap_or_else(|| vec!["0".into(); n]);
    if current_text.len() != n {
        return Err(SystemError::Params(format!("current needs {n} components")));
    }
    let density = check_metric(&metric_text, &base)?;
    let space = Arc::new(PhaseSpec::new(PhaseKind::Maxwell, n, n).base_names(&refs(&base)).fiber_names(&refs(&fiber)).density(&density).build()?);
    let chart = space.chart();
    let metric = parse_matrix(&metric_text, chart)?;
    let current: Vec<Expr> = current_text.iter().map(|t| parse_on(t, chart)).collect::<Result<_, _>>()?;

    let mut j_form = Form::zero(chart, n - 1);
    for (a, ja) in current.iter().enumerate() {
        j_form = j_form.plus(&space.volume_alpha(a).scale(ja));
    }
    let dj = j_form.d().map_err(|e| SystemError::Params(e.to_string()))?;
    let residual = max_abs_at(&dj, &space.probe_points(0xc0, 50))?;
    if residual > 1e-10 {
        return Err(SystemError::CurrentNotConserved { residual });
    }

    let (eps, _) = space.eps();
    let mut h = Expr::var(eps);
    for a in 0..n {
        h = h.add(&current[a].mul(&Expr::var(space.y(a))));
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let coef = metric[a][c].mul(&metric[b][d]);
                    if coef.is_zero() {
                        continue;
                    }
                    let pp = observables::p_a(&space, a, b).mul(&observables::p_a(&space, c, d));
                    h = h.sub(&coef.mul(&pp).scale(0.25));
                }
            }
        }
    }

    let jet = Lagrangian::jet_chart(&base, &fiber)?;
    let ginv = sym_inverse(&parse_matrix(&metric_text, &jet)?);
    let v = |beta: usize, alpha: usize| Expr::var(n + n + beta * n + alpha);
    // F_{αβ} = ∂_α A_β - ∂_β A_α = v^β_α - v^α_β
    let f = |a: usize, b: usize| v(b, a).sub(&v(a, b));
    let mut l = Expr::zero();
    for a in 0..n {
        for b in 0..n {
            let mut upper = Expr::zero();
            for c in 0..n {
                for d in 0..n {
                    upper = upper.add(&ginv[a][c].mul(&ginv[b][d]).mul(&f(c, d)));
                }
            }
            l = l.sub(&f(a, b).mul(&upper).scale(0.25));
        }
        l = l.sub(&parse_on(&current_text[a], &jet)?.mul(&Expr::var(n + a)));
    }
    let lagrangian = Arc::new(Lagrangian::from_expr(n, n, jet, l)?);
    Ok(MaxwellSystem {
        params: params.clone(),
        system: HamiltonianSystem { name: "maxwell".into(), space, lagrangian, hamiltonian: h, legendre_start: vec![0.0; n * n] },
        metric,
        current,
    })
}

impl MaxwellSystem {
    pub fn space(&self) -> &PhaseSpace {
        &self.system.space
    }

    pub fn pi(&self) -> Form {
        observables::maxwell_pi(self.space())
    }

    pub fn a(&self) -> Form {
        observables::maxwell_a(self.space())
    }

    /// `j = j^α ω_α`.
    pub fn current_form(&self) -> Form {
        let sp = self.space();
        let mut out = Form::zero(sp.chart(), sp.n() - 1);
        for (a, ja) in self.current.iter().enumerate() {
            out = out.plus(&sp.volume_alpha(a).scale(ja));
        }
        out
    }

    /// The gauge generator `df ∧ π` for `f` on the base.
    pub fn gauge_generator(&self, f: &Expr) -> Form {
        Form::scalar(self.space().chart(), f.clone()).d().expect("differentiable").wedge(&self.pi()).expect("chart")
    }

    #[cfg(test)]
    pub(crate) fn base_for_tests(n: usize) -> Arc<Chart> {
        Chart::new(&names_or(&None, "x", n)).unwrap().into_arc()
    }

    fn base_chart(&self) -> Result<Arc<Chart>, SystemError> {
        let sp = self.space();
        Chart::new(&sp.chart().names()[..sp.n()]).map(Chart::into_arc).map_err(|e| SystemError::Params(e.to_string()))
    }

    fn base_metric(&self, chart: &Chart) -> Result<(Vec<Vec<Expr>>, Expr), SystemError> {
        let text = self.params.metric.clone().unwrap_or_else(|| default_metric(self.params.n));
        let g = match self.space().density_text() {
            Some(t) => parse_on(t, chart)?,
            None => Expr::one(),
        };
        Ok((parse_matrix(&text, chart)?, g))
    }

    /// `F^{αβ}` of a potential `a_β(x)` given on the base chart.
    pub fn field_strength_up(&self, a: &[Expr]) -> Result<Vec<Vec<Expr>>, SystemError> {
        let n = self.params.n;
        let chart = self.base_chart()?;
        let (g, _) = self.base_metric(&chart)?;
        let ginv = sym_inverse(&g);
        let low = |c: usize, d: usize| a[d].derivative(c).sub(&a[c].derivative(d));
        Ok((0..n)
            .map(|al| {
                (0..n)
                    .map(|be| {
                        let mut e = Expr::zero();
                        for c in 0..n {
                            for d in 0..n {
                                e = e.add(&ginv[al][c].mul(&ginv[be][d]).mul(&low(c, d)));
                            }
                        }
                        e
                    })
                    .collect()
            })
            .collect())
    }

    /// The current `j^β = (1/g) ∂_α(g F^{αβ})` sourced by a potential, as base-chart text.
    pub fn manufactured_current(&self, a: &[Expr]) -> Result<Vec<String>, SystemError> {
        let n = self.params.n;
        let chart = self.base_chart()?;
        let (_, g) = self.base_metric(&chart)?;
        let f = self.field_strength_up(a)?;
        Ok((0..n)
            .map(|be| {
                let mut e = Expr::zero();
                for al in 0..n {
                    e = e.add(&g.mul(&f[al][be]).derivative(al));
                }
                e.div(&g).print(&chart)
            })
            .collect())
    }

    /// Section `x ↦ (x, a(x), ε = 0, p^{A_αβ} = F^{αβ}(x))` as a map into the phase chart.
    pub fn graph_map(&self, a: &[Expr]) -> Result<Vec<Expr>, SystemError> {
        let sp = self.space();
        let n = sp.n();
        let f = self.field_strength_up(a)?;
        let mut map = vec![Expr::zero(); sp.dim()];
        for al in 0..n {
            map[sp.x(al)] = Expr::var(al);
            map[sp.y(al)] = a[al].clone();
        }
        for al in 0..n {
            for be in al + 1..n {
                for (c, s) in momentum_coordinate(sp, al, be) {
                    map[c] = f[al][be].scale(s);
                }
            }
        }
        Ok(map)
    }

    /// Largest values of `dπ - j`, `dA - Σ g g p dx∧dx` and `dA - {Hω, A}` on the
    /// graph of `a`, at base probe points.
    pub fn graph_residuals(&self, a: &[Expr]) -> Result<[f64; 3], SystemError> {
        let sp = self.space();
        let n = sp.n();
        let chart = self.base_chart()?;
        let map = self.graph_map(a)?;
        let pts = probe::points(0x6a, n, 50, -1.0, 1.0);
        let pull = |f: &Form| f.pullback(&chart, &map).map_err(|e| SystemError::Params(e.to_string()));
        let dform = |f: &Form| f.d().map_err(|e| SystemError::Params(e.to_string()));
        let r1 = max_abs_at(&pull(&dform(&self.pi())?)?.minus(&pull(&self.current_form())?), &pts)?;
        let mut fa = Form::zero(sp.chart(), 2);
        for al in 0..n {
            for be in al + 1..n {
                let mut c = Expr::zero();
                for g in 0..n {
                    for d in 0..n {
                        c = c.add(&self.metric[al][g].mul(&self.metric[be][d]).mul(&observables::p_a(sp, g, d)));
                    }
                }
                fa = fa.plus(&sp.dx(al).wedge(&sp.dx(be)).expect("chart").scale(&c));
            }
        }
        let da = pull(&dform(&self.a())?)?;
        let r2 = max_abs_at(&da.minus(&pull(&fa)?), &pts)?;
        let h_a = self.system.algebra().h_omega_bracket(&self.system.hamiltonian, &self.a()).map_err(|e| SystemError::Params(e.to_string()))?;
        let r3 = max_abs_at(&da.minus(&pull(&h_a)?), &pts)?;
        Ok([r1, r2, r3])
    }

    /// `{^s(df∧π), ^sA}_s - ^s(df)` and `{^s(df∧π), ^sπ}_s`.
    pub fn gauge_brackets(&self, f: &Expr) -> Result<(SuperForm, SuperForm), SystemError> {
        let alg = self.system.algebra();
        let err = |e: crate::brackets::BracketError| SystemError::Params(e.to_string());
        let gen = alg.superize(&self.gauge_generator(f)).map_err(err)?;
        let a = alg.superize(&self.a()).map_err(err)?;
        let pi = alg.superize(&self.pi()).map_err(err)?;
        let df = Form::scalar(self.space().chart(), f.clone()).d().expect("differentiable");
        let with_a = alg.sbracket(&gen, &a).map_err(err)?.minus(&alg.super_of(&df));
        let with_pi = alg.sbracket(&gen, &pi).map_err(err)?;
        Ok((with_a, with_pi))
    }

    /// `ε - ¼ g g p p + j A` read on the unconstrained Weyl chart.
    ///
    /// Hamilton's equations of this function do not reproduce Maxwell's equations,
    /// so it is refused unless `allow_naive` is set.
    pub fn naive_weyl_hamiltonian(&self, allow_naive: bool) -> Result<(PhaseSpace, Expr), SystemError> {
        if !allow_naive {
            return Err(SystemError::NaiveMaxwell);
        }
        log::warn!("using the naive Maxwell Hamiltonian on the unconstrained Weyl chart");
        let n = self.params.n;
        let sp = self.space();
        let names: Vec<&str> = sp.chart().names()[..2 * n].iter().map(String::as_str).collect();
        let mut spec = PhaseSpec::new(PhaseKind::Weyl, n, n).base_names(&names[..n]).fiber_names(&names[n..]);
        spec.density = sp.density_text().map(str::to_string);
        let weyl = spec.build()?;
        let mut map: Vec<Expr> = (0..weyl.q_dim()).map(Expr::var).collect();
        map.push(Expr::var(weyl.eps().0));
        for a in 0..n {
            for b in a + 1..n {
                map.push(weyl.p_weyl(b, a));
            }
        }
        let h = self.system.hamiltonian.substitute(&map).map_err(|e| SystemError::Params(e.to_string()))?;
        Ok((weyl, h))
    }
}

/// Coordinates carrying `p^{A_αβ}` for `α < β`, with signs.
fn momentum_coordinate(sp: &PhaseSpace, alpha: usize, beta: usize) -> Vec<(usize, f64)> {
    let e = observables::p_a(sp, alpha, beta);
    e.variables().into_iter().map(|c| (c, e.derivative(c).as_const().unwrap_or(1.0))).collect()
}

/// A built example system.
#[derive(Debug, Clone)]
pub enum System {
    ScalarField(ScalarField),
    String(StringSystem),
    Maxwell(MaxwellSystem),
}

impl System {
    pub fn hamiltonian_system(&self) -> &HamiltonianSystem {
        match self {
            System::ScalarField(s) => &s.system,
            System::String(s) => &s.system,
            System::Maxwell(s) => &s.system,
        }
    }
}

pub const SYSTEM_NAMES: [&str; 3] = ["scalar_field", "string", "maxwell"];

/// Build a system by registry name from a JSON parameter block.
pub fn build_system(name: &str, params: &serde_json::Value) -> Result<System, SystemError> {
    fn de<T: serde::de::DeserializeOwned + Default>(v: &serde_json::Value) -> Result<T, SystemError> {
        if v.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(v.clone()).map_err(|e| SystemError::Params(e.to_string()))
    }
    match name {
        "scalar_field" => Ok(System::ScalarField(scalar_field_system(&de(params)?)?)),
        "string" => Ok(System::String(string_system(&de(params)?)?)),
        "maxwell" => Ok(System::Maxwell(maxwell_system(&de(params)?)?)),
        other => Err(SystemError::Unknown(other.to_string())),
    }
}

/// Velocity coordinate names of a system's jet chart, for reports.
pub fn velocity_names(n: usize, k: usize) -> Vec<String> {
    (0..k).flat_map(|i| (0..n).map(move |a| velocity_name(i, a))).collect()
}

#[cfg(test)]
mod tests;

//! The p-bracket algebra on `(n-1)`-forms and its Grassmann extension.
//!
//! A form `a` has a Hamiltonian vector field `ξ` when `da = -ξ ⨼ Ω`. Every chart
//! in [`crate::phase`] has `θ = g Σ_m P_m β_m` with constant `q`-forms `β_m`, so
//! the equation splits into two linear systems with constant matrices: the
//! `dP_m ∧ dq` part fixes the `q`-components of `ξ`, the pure `dq` part then
//! fixes the momentum components. [`Algebra::solve`] applies the
//! pseudo-inverses symbolically; membership is confirmed by the residual at
//! seeded probe points.

mod superform;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{EvalError, Expr, OpaqueJet};
use crate::exterior::{ExteriorError, Form, MultiIndex, Multivector, NumTensor};
use crate::phase::PhaseSpace;

pub use superform::{tau_merge, SuperForm, SuperPair, SuperVector};

pub const MEMBERSHIP_TOL: f64 = 1e-9;
pub const MEMBERSHIP_POINTS: usize = 50;
pub const MEMBERSHIP_SEED: u64 = 0x0b5e_55ed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BracketError {
    #[error("form is not in P^(n-1)M: residual {residual:e}")]
    NotInPn1 { residual: f64 },
    #[error("dx^{subset:?} ^ a is not in P^(n-1)M: residual {residual:e}")]
    NotInPp1 { subset: Vec<usize>, residual: f64 },
    #[error("form depends on momenta or on opaque data; need a form on X x Y")]
    NotBaseForm,
    #[error("form is not admissible: dx component {residual:e}")]
    NotAdmissible { residual: f64 },
    #[error("degree: {0}")]
    Degree(String),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A form together with its Hamiltonian vector field.
#[derive(Debug, Clone)]
pub struct HamiltonianPair {
    pub form: Form,
    pub xi: Multivector,
}

/// Maximum absolute coefficient of `form` over `points`.
pub fn max_abs_at(form: &Form, points: &[Vec<f64>]) -> Result<f64, EvalError> {
    let mut worst: f64 = 0.0;
    for pt in points {
        worst = worst.max(form.eval(pt)?.max_abs());
    }
    Ok(worst)
}

fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let mut p = m.clone().pseudo_inverse(1e-12).expect("svd");
    p.iter_mut().for_each(|v| {
        if v.abs() < 1e-13 {
            *v = 0.0
        }
    });
    p
}

/// Linear combination `Σ w_j e_j`, skipping zero weights.
fn combine(weights: impl Iterator<Item = (f64, Expr)>) -> Expr {
    let mut acc = Expr::zero();
    for (w, e) in weights {
        if w != 0.0 && !e.is_zero() {
            acc = acc.add(&e.scale(w));
        }
    }
    acc
}

/// Bracket operations bound to one phase space.
pub struct Algebra<'a> {
    space: &'a PhaseSpace,
    beta: Vec<Form>,
    b_rows: Vec<(usize, MultiIndex)>,
    b_pinv: DMatrix<f64>,
    e_rows: Vec<MultiIndex>,
    e_pinv: DMatrix<f64>,
    points: Vec<Vec<f64>>,
    tol: f64,
}

impl<'a> Algebra<'a> {
    pub fn new(space: &'a PhaseSpace) -> Self {
        let chart = space.chart();
        let q = space.q_dim();
        let n = space.n();
        let mc = space.momentum_count();
        let beta: Vec<Form> = (0..mc)
            .map(|m| {
                let mut f = Form::zero(chart, n);
                for (set, s) in space.embedding(m) {
                    f.add_term(&set.to_vec(), Expr::constant(*s));
                }
                f
            })
            .collect();
        let k_sets = MultiIndex::subsets(q, n - 1);
        let b_rows: Vec<(usize, MultiIndex)> =
            (0..mc).flat_map(|m| k_sets.iter().map(move |k| (m, k.clone()))).collect();
        let mut b = DMatrix::zeros(b_rows.len(), q);
        for mu in 0..q {
            let part = Multivector::partial(chart, mu);
            for (m, bm) in beta.iter().enumerate() {
                let c = bm.contract(&part).expect("degree");
                for (key, v) in c.terms() {
                    let row = m * k_sets.len() + k_sets.iter().position(|s| s == key).unwrap();
                    b[(row, mu)] = v.as_const().expect("constant");
                }
            }
        }
        let e_rows = MultiIndex::subsets(q, n);
        let mut e = DMatrix::zeros(e_rows.len(), mc);
        for m in 0..mc {
            for (set, s) in space.embedding(m) {
                e[(e_rows.iter().position(|r| r == set).unwrap(), m)] = *s;
            }
        }
        Algebra {
            space,
            beta,
            b_rows,
            b_pinv: pinv(&b),
            e_rows,
            e_pinv: pinv(&e),
            points: space.probe_points(MEMBERSHIP_SEED, MEMBERSHIP_POINTS),
            tol: MEMBERSHIP_TOL,
        }
    }

    /// Replace the probe sample used for membership decisions.
    pub fn with_probe(mut self, seed: u64, count: usize) -> Self {
        self.points = self.space.probe_points(seed, count);
        self
    }

    pub fn with_points(mut self, points: Vec<Vec<f64>>) -> Self {
        self.points = points;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn space(&self) -> &PhaseSpace {
        self.space
    }

    pub fn omega(&self) -> &Form {
        self.space.omega()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn residual(&self, form: &Form) -> Result<f64, EvalError> {
        max_abs_at(form, &self.points)
    }

    /// Candidate `ξ` with `ξ ⨼ Ω = -da`; exact whenever `a ∈ P^(n-1)M`.
    pub fn solve(&self, a: &Form) -> Result<Multivector, BracketError> {
        let sp = self.space;
        let n = sp.n();
        let q = sp.q_dim();
        let chart = sp.chart();
        if a.degree() + 1 != n {
            return Err(BracketError::Degree(format!("expected an {}-form, got degree {}", n - 1, a.degree())));
        }
        let da = a.d()?;
        let k_len = MultiIndex::subsets(q, n - 1).len();
        let mut a_m: Vec<Expr> = vec![Expr::zero(); self.b_rows.len()];
        let mut a_0: BTreeMap<MultiIndex, Expr> = BTreeMap::new();
        let k_sets = MultiIndex::subsets(q, n - 1);
        for (key, coef) in da.terms() {
            let moms: Vec<usize> = key.iter().filter(|&c| c >= q).collect();
            match moms.len() {
                0 => {
                    a_0.insert(key.clone(), coef.clone());
                }
                1 => {
                    // dq^K ∧ dP_m = (-1)^(n-1) dP_m ∧ dq^K
                    let m = moms[0] - q;
                    let kset = key.without_pos(key.len() - 1);
                    let row = m * k_len + k_sets.iter().position(|s| *s == kset).unwrap();
                    let s = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
                    a_m[row] = a_m[row].add(&coef.scale(s));
                }
                _ => {}
            }
        }
        let g = sp.density();
        let flat = g.is_one();
        let xi_q: Vec<Expr> = (0..q)
            .map(|mu| {
                let e = combine((0..self.b_rows.len()).map(|r| (self.b_pinv[(mu, r)], a_m[r].clone())));
                if flat {
                    e
                } else {
                    e.div(&g)
                }
            })
            .collect();
        let xq = Multivector::vector(chart, &xi_q.iter().cloned().chain(std::iter::repeat_n(Expr::zero(), sp.momentum_count())).collect::<Vec<_>>());
        // R = -A_0 + dg ∧ Σ_m P_m (ξ_q ⨼ β_m)
        let mut r_form = Form::zero(chart, n);
        for (key, coef) in &a_0 {
            r_form.add_term(&key.to_vec(), coef.neg());
        }
        let mut xi_g = Expr::zero();
        if !flat {
            let dg = Form::scalar(chart, g.clone()).d()?;
            let mut y = Form::zero(chart, n - 1);
            for (m, bm) in self.beta.iter().enumerate() {
                y = y.plus(&bm.contract(&xq)?.scale(&Expr::var(sp.momentum(m))));
            }
            r_form = r_form.plus(&dg.wedge(&y)?);
            for (alpha, comp) in xi_q.iter().enumerate().take(n) {
                xi_g = xi_g.add(&comp.mul(&g.derivative(alpha)));
            }
        }
        let r_vals: Vec<Expr> = self.e_rows.iter().map(|set| r_form.coefficient(&set.to_vec())).collect();
        let mut comps = xi_q;
        for m in 0..sp.momentum_count() {
            let d_m = combine((0..self.e_rows.len()).map(|j| (self.e_pinv[(m, j)], r_vals[j].clone())));
            let c_m = if flat { d_m } else { d_m.sub(&Expr::var(sp.momentum(m)).mul(&xi_g)).div(&g) };
            comps.push(c_m);
        }
        Ok(Multivector::vector(chart, &comps))
    }

    /// `da + ξ ⨼ Ω`, which vanishes exactly for a Hamiltonian pair.
    pub fn pair_defect(&self, a: &Form, xi: &Multivector) -> Result<Form, BracketError> {
        Ok(a.d()?.plus(&self.omega().contract(xi)?))
    }

    /// Solve and verify membership in `P^(n-1)M`.
    pub fn xi(&self, a: &Form) -> Result<HamiltonianPair, BracketError> {
        let xi = self.solve(a)?;
        let residual = self.residual(&self.pair_defect(a, &xi)?)?;
        if residual > self.tol {
            return Err(BracketError::NotInPn1 { residual });
        }
        Ok(HamiltonianPair { form: a.clone(), xi })
    }

    /// Canonical components `c_J ∂/∂p_J` mapped onto chart momenta.
    fn canonical_to_chart(&self, c: &BTreeMap<MultiIndex, Expr>) -> Vec<Expr> {
        (0..self.space.momentum_count())
            .map(|m| {
                combine(self.e_rows.iter().enumerate().filter_map(|(j, set)| c.get(set).map(|e| (self.e_pinv[(m, j)], e.clone()))))
            })
            .collect()
    }

    fn require_base(&self, e: &Expr) -> Result<(), BracketError> {
        if e.has_jet() || e.variables().iter().any(|&v| v >= self.space.q_dim()) {
            return Err(BracketError::NotBaseForm);
        }
        Ok(())
    }

    /// Closed-form `Ξ(Q^ζ)` for an `(n-1)`-form `ζ` on `X × Y`.
    pub fn xi_q(&self, zeta: &Form) -> Result<HamiltonianPair, BracketError> {
        let sp = self.space;
        let q = sp.q_dim();
        if zeta.degree() + 1 != sp.n() {
            return Err(BracketError::Degree("ζ must be an (n-1)-form".into()));
        }
        for (key, coef) in zeta.terms() {
            self.require_base(coef)?;
            if key.iter().any(|c| c >= q) {
                return Err(BracketError::NotBaseForm);
            }
        }
        let g = sp.density();
        let dz = zeta.d()?;
        let c: BTreeMap<MultiIndex, Expr> = dz
            .terms()
            .iter()
            .map(|(set, v)| (set.clone(), if g.is_one() { v.neg() } else { v.neg().div(&g) }))
            .collect();
        let mut comps: Vec<Expr> = vec![Expr::zero(); q];
        comps.extend(self.canonical_to_chart(&c));
        self.checked(zeta, Multivector::vector(sp.chart(), &comps))
    }

    /// Closed-form `Ξ(P_ξ)`: the lift of `ξ` that leaves `θ` invariant.
    pub fn xi_p(&self, field: &[Expr]) -> Result<HamiltonianPair, BracketError> {
        let sp = self.space;
        let (n, q) = (sp.n(), sp.q_dim());
        assert_eq!(field.len(), q, "vector field on X x Y");
        for f in field {
            self.require_base(f)?;
        }
        let g = sp.density();
        let mut xi_g = Expr::zero();
        for (alpha, comp) in field.iter().enumerate().take(n) {
            xi_g = xi_g.add(&comp.mul(&g.derivative(alpha)));
        }
        let mut dot: BTreeMap<MultiIndex, Expr> = BTreeMap::new();
        let mut push = |set: MultiIndex, e: Expr| {
            let slot = dot.entry(set).or_insert_with(Expr::zero);
            *slot = slot.add(&e);
        };
        let ratio = if g.is_one() { Expr::zero() } else { xi_g.div(&g) };
        for set in MultiIndex::subsets(q, n) {
            let p_i = sp.canonical_momentum(&set);
            if p_i.is_zero() {
                continue;
            }
            if !ratio.is_zero() {
                push(set.clone(), ratio.mul(&p_i).neg());
            }
            for pos in 0..n {
                let target = set.get(pos);
                for nu in 0..q {
                    let dxi = field[target].derivative(nu);
                    if dxi.is_zero() {
                        continue;
                    }
                    let mut idx = set.to_vec();
                    idx[pos] = nu;
                    if let Some((j, s)) = MultiIndex::canonical(&idx) {
                        push(j, p_i.mul(&dxi).scale(-s));
                    }
                }
            }
        }
        let mut comps: Vec<Expr> = field.to_vec();
        comps.extend(self.canonical_to_chart(&dot));
        let form = sp.theta().contract(&Multivector::vector(sp.chart(), &pad(field, sp.dim())))?;
        self.checked(&form, Multivector::vector(sp.chart(), &comps))
    }

    fn checked(&self, a: &Form, xi: Multivector) -> Result<HamiltonianPair, BracketError> {
        let residual = self.residual(&self.pair_defect(a, &xi)?)?;
        if residual > self.tol {
            return Err(BracketError::NotInPn1 { residual });
        }
        Ok(HamiltonianPair { form: a.clone(), xi })
    }

    /// Internal bracket `{a, b} = Ξ(b) ⨼ Ξ(a) ⨼ Ω`.
    pub fn internal(&self, a: &HamiltonianPair, b: &HamiltonianPair) -> Result<Form, BracketError> {
        Ok(self.omega().contract(&a.xi)?.contract(&b.xi)?)
    }

    /// The bracket together with its field `[Ξ(a), Ξ(b)]`.
    pub fn internal_pair(&self, a: &HamiltonianPair, b: &HamiltonianPair) -> Result<HamiltonianPair, BracketError> {
        Ok(HamiltonianPair { form: self.internal(a, b)?, xi: a.xi.lie_bracket(&b.xi)? })
    }

    /// External bracket `{a, b} = -Ξ(b) ⨼ da` for any form `a`.
    pub fn external(&self, a: &Form, b: &HamiltonianPair) -> Result<Form, BracketError> {
        Ok(a.d()?.contract(&b.xi)?.neg())
    }

    /// `{b, a} = Ξ(b) ⨼ da`.
    pub fn external_left(&self, b: &HamiltonianPair, a: &Form) -> Result<Form, BracketError> {
        Ok(a.d()?.contract(&b.xi)?)
    }

    /// `{ψ, a} = -Ξ(a) ⨼ dψ` for an n-form `ψ`.
    pub fn top_bracket(&self, psi: &Form, a: &HamiltonianPair) -> Result<Form, BracketError> {
        Ok(psi.d()?.contract(&a.xi)?.neg())
    }

    /// `H ω`.
    pub fn h_omega(&self, h: &Expr) -> Form {
        self.space.volume().scale(h)
    }

    /// Superform `^s a` with its Hamiltonian field.
    pub fn superize(&self, a: &Form) -> Result<SuperPair, BracketError> {
        superform::superize(self, a)
    }

    /// `^s a` without computing `Ξ`.
    pub fn super_of(&self, a: &Form) -> SuperForm {
        superform::super_of(self.space, a)
    }

    pub fn sbracket(&self, a: &SuperPair, b: &SuperPair) -> Result<SuperForm, BracketError> {
        superform::sbracket(self, a, b)
    }

    /// Largest `dx^α` component of `Ξ(^s a)` over the probe points.
    pub fn admissibility_defect(&self, a: &SuperPair) -> Result<f64, BracketError> {
        let mut worst: f64 = 0.0;
        for xi in a.xi.terms().values() {
            for pt in &self.points {
                let v = xi.eval_vector(pt)?;
                for alpha in 0..self.space.n() {
                    worst = worst.max(v[alpha].abs());
                }
            }
        }
        Ok(worst)
    }

    pub fn is_admissible(&self, a: &Form) -> Result<bool, BracketError> {
        let sa = self.superize(a)?;
        Ok(self.admissibility_defect(&sa)? <= 1e-10)
    }

    /// `{ψ, a} = -Σ_S (∂_S ∧ Ξ(dx^S ∧ a)) ⨼ dψ` for admissible `a`.
    pub fn psi_bracket(&self, psi: &Form, a: &Form) -> Result<Form, BracketError> {
        let sa = self.superize(a)?;
        let defect = self.admissibility_defect(&sa)?;
        if defect > 1e-10 {
            return Err(BracketError::NotAdmissible { residual: defect });
        }
        let dpsi = psi.d()?;
        let chart = self.space.chart();
        let mut out = Form::zero(chart, a.degree() + 1);
        for (mask, xi) in sa.xi.terms() {
            let mut mv = Multivector::scalar(chart, Expr::one());
            for alpha in superform::mask_indices(*mask) {
                mv = mv.wedge(&Multivector::partial(chart, alpha))?;
            }
            mv = mv.wedge(xi)?;
            out = out.minus(&dpsi.contract(&mv)?);
        }
        Ok(out)
    }

    /// `{Hω, a}` for an admissible form `a`.
    pub fn h_omega_bracket(&self, h: &Expr, a: &Form) -> Result<Form, BracketError> {
        self.psi_bracket(&self.h_omega(h), a)
    }

    /// Pointwise integrand of the superintegral bracket with graph tangents `X_α`
    /// normalized by `dx^β(X_α) = δ`.
    pub fn super_integrand(&self, psi: &Form, a: &SuperPair, pt: &[f64], tangents: &[Vec<f64>]) -> Result<NumTensor, BracketError> {
        let dpsi = psi.d()?.eval(pt)?;
        let mut out: Option<NumTensor> = None;
        for (mask, xi) in a.xi.terms() {
            let mut vs: Vec<Vec<f64>> = superform::mask_indices(*mask).map(|alpha| tangents[alpha].clone()).collect();
            vs.push(xi.eval_vector(pt)?);
            let term = dpsi.fill(&vs);
            out.get_or_insert_with(|| NumTensor::zero(term.dim, term.degree)).add_scaled(&term, -1.0);
        }
        Ok(out.unwrap_or_else(|| NumTensor::zero(self.space.dim(), 0)))
    }

    /// Both sides of `{Hω, P_ξ} = L_{Ξ(P_ξ)}(θ - Hω) + d(ξ ⨼ Hω)`.
    pub fn noether_sides(&self, field: &[Expr], h: &Expr) -> Result<(Form, Form), BracketError> {
        let pair = self.xi_p(field)?;
        let h_om = self.h_omega(h);
        let lhs = self.top_bracket(&h_om, &pair)?;
        let xi_q = Multivector::vector(self.space.chart(), &pad(field, self.space.dim()));
        let rhs = self
            .space
            .theta()
            .minus(&h_om)
            .lie_derivative(&pair.xi)?
            .plus(&h_om.contract(&xi_q)?.d()?);
        Ok((lhs, rhs))
    }
}

/// Extend a field on `X × Y` by zero momentum components.
pub fn pad(field: &[Expr], dim: usize) -> Vec<Expr> {
    let mut v = field.to_vec();
    v.resize(dim, Expr::zero());
    v
}

/// Observables on a phase space.
pub mod observables {
    use super::*;

    /// `Q^{i,f} = y^i Σ_α f^α ω_α`.
    pub fn position(space: &PhaseSpace, i: usize, f: &[Expr]) -> Form {
        let mut out = Form::zero(space.chart(), space.n() - 1);
        for (alpha, fa) in f.iter().enumerate() {
            out = out.plus(&space.volume_alpha(alpha).scale(fa));
        }
        out.scale(&Expr::var(space.y(i)))
    }

    /// `P_{μ,g} = g ∂_μ ⨼ θ`.
    pub fn momentum(space: &PhaseSpace, mu: usize, g: &Expr) -> Form {
        space.theta().contract(&space.partial(mu)).expect("degree").scale(g)
    }

    /// `P_ξ = ξ ⨼ θ`.
    pub fn generalized_momentum(space: &PhaseSpace, field: &[Expr]) -> Form {
        space.theta().contract(&Multivector::vector(space.chart(), &pad(field, space.dim()))).expect("degree")
    }

    /// `P*_{μ,g} = g ∂_μ ⨼ (θ - Hω)`.
    pub fn momentum_star(space: &PhaseSpace, mu: usize, g: &Expr, h: &Expr) -> Form {
        space.theta().minus(&space.volume().scale(h)).contract(&space.partial(mu)).expect("degree").scale(g)
    }

    /// `p^{A_α β}` on a chart whose fibers are `A_1..A_n`.
    pub fn p_a(space: &PhaseSpace, alpha: usize, beta: usize) -> Expr {
        if alpha == beta {
            return Expr::zero();
        }
        space.p_weyl(beta, alpha)
    }

    /// `π = ½ Σ_{α,β} p^{A_α β} ∂_α ⨼ ∂_β ⨼ ω`.
    pub fn maxwell_pi(space: &PhaseSpace) -> Form {
        let n = space.n();
        let mut out = Form::zero(space.chart(), n.saturating_sub(2));
        for alpha in 0..n {
            for beta in 0..n {
                if alpha == beta {
                    continue;
                }
                let term = space.volume().contract(&space.partial(beta)).expect("degree").contract(&space.partial(alpha)).expect("degree");
                out = out.plus(&term.scale(&p_a(space, alpha, beta)).scale_f64(0.5));
            }
        }
        out
    }

    /// `A = A_α dx^α`.
    pub fn maxwell_a(space: &PhaseSpace) -> Form {
        let mut out = Form::zero(space.chart(), 1);
        for alpha in 0..space.n() {
            out = out.plus(&space.dx(alpha).scale(&Expr::var(space.y(alpha))));
        }
        out
    }

    /// `η₀ = -∂_t ⨼ (θ - Hω)` with `t` the first base coordinate.
    pub fn eta0(space: &PhaseSpace, h: &Expr) -> Form {
        momentum_star(space, 0, &Expr::one(), h).neg()
    }
}

/// Pointwise least-squares outcome for `ξ ⨼ Ω = -da`.
#[derive(Debug, Clone)]
pub struct PointSolve {
    pub xi: Vec<f64>,
    pub residual: f64,
    pub kernel_dim: usize,
}

/// Numeric solver used by [`xi_general`]; also wrapped as opaque jets.
#[derive(Debug)]
pub struct LeastSquaresXi {
    da: Form,
    omega: Form,
    dim: usize,
}

impl LeastSquaresXi {
    pub fn new(space: &PhaseSpace, a: &Form) -> Result<Self, BracketError> {
        Ok(LeastSquaresXi { da: a.d()?, omega: space.omega().clone(), dim: space.dim() })
    }

    pub fn solve_at(&self, pt: &[f64]) -> Result<PointSolve, EvalError> {
        let om = self.omega.eval(pt)?;
        let rhs_t = self.da.eval(pt)?;
        let rows: Vec<MultiIndex> = MultiIndex::subsets(self.dim, self.da.degree());
        let mut m = DMatrix::zeros(rows.len(), self.dim);
        for c in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[c] = 1.0;
            let col = om.interior(&e);
            for (key, v) in &col.terms {
                let r = rows.binary_search(key).expect("row");
                m[(r, c)] = *v;
            }
        }
        let mut rhs = DVector::zeros(rows.len());
        for (key, v) in &rhs_t.terms {
            let r = rows.binary_search(key).expect("row");
            rhs[r] = -v;
        }
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
        let sol = svd.solve(&rhs, 1e-10 * smax.max(1.0)).expect("svd solve");
        let residual = (&m * &sol - &rhs).amax();
        Ok(PointSolve { xi: sol.iter().copied().collect(), residual, kernel_dim: self.dim - rank })
    }
}

#[derive(Debug)]
struct LsqComponent {
    solver: Arc<LeastSquaresXi>,
    comp: usize,
    name: String,
}

const FD_STEP: f64 = 1e-5;

impl OpaqueJet for LsqComponent {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, pt: &[f64]) -> Result<f64, EvalError> {
        Ok(self.solver.solve_at(pt)?.xi[self.comp])
    }

    fn gradient(&self, pt: &[f64]) -> Result<Vec<f64>, EvalError> {
        (0..pt.len()).map(|c| self.partial(pt, c)).collect()
    }

    fn partial(&self, pt: &[f64], c: usize) -> Result<f64, EvalError> {
        let mut a = pt.to_vec();
        let mut b = pt.to_vec();
        a[c] += FD_STEP;
        b[c] -= FD_STEP;
        Ok((self.value(&a)? - self.value(&b)?) / (2.0 * FD_STEP))
    }
}

/// Result of the general least-squares construction.
#[derive(Debug, Clone)]
pub struct GeneralXi {
    pub pair: HamiltonianPair,
    pub max_residual: f64,
    /// Largest kernel dimension of `X ↦ X ⨼ Ω` seen at the probe points.
    pub kernel_dim: usize,
}

/// `Ξ(a)` by pointwise least squares, for forms without a closed-form field.
pub fn xi_general(space: &PhaseSpace, a: &Form, seed: u64) -> Result<GeneralXi, BracketError> {
    if a.degree() + 1 != space.n() {
        return Err(BracketError::Degree(format!("expected an {}-form", space.n() - 1)));
    }
    let solver = Arc::new(LeastSquaresXi::new(space, a)?);
    let mut max_residual: f64 = 0.0;
    let mut kernel_dim = 0;
    for pt in space.probe_points(seed, MEMBERSHIP_POINTS) {
        let s = solver.solve_at(&pt)?;
        max_residual = max_residual.max(s.residual);
        kernel_dim = kernel_dim.max(s.kernel_dim);
    }
    if max_residual > MEMBERSHIP_TOL {
        return Err(BracketError::NotInPn1 { residual: max_residual });
    }
    let comps: Vec<Expr> = (0..space.dim())
        .map(|c| {
            Expr::jet(Arc::new(LsqComponent { solver: solver.clone(), comp: c, name: format!("xi[{}]", space.chart().name(c)) }))
        })
        .collect();
    if kernel_dim > 0 {
        log::warn!("Ξ is determined only up to a {kernel_dim}-dimensional kernel");
    }
    Ok(GeneralXi { pair: HamiltonianPair { form: a.clone(), xi: Multivector::vector(space.chart(), &comps) }, max_residual, kernel_dim })
}

#[cfg(test)]
mod tests;

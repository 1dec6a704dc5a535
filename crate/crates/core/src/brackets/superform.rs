//! Forms and fields with coefficients in the Grassmann algebra `R[τ_1..τ_n]`.
//!
//! A monomial `τ_S` is a bitmask over base directions, read in ascending order.
//! The `τ` commute with forms and vectors.

use std::collections::BTreeMap;

use crate::expr::{EvalError, Expr};
use crate::exterior::{Form, MultiIndex, Multivector, NumTensor};
use crate::phase::PhaseSpace;

use super::{Algebra, BracketError};

/// `τ_S τ_T = sign τ_{S ∪ T}`, or `None` when the sets overlap.
pub fn tau_merge(s: u32, t: u32) -> Option<(u32, f64)> {
    if s & t != 0 {
        return None;
    }
    let mut swaps = 0u32;
    for j in mask_indices(t) {
        swaps += (s >> (j + 1)).count_ones();
    }
    Some((s | t, if swaps.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

pub(crate) fn mask_indices(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |b| mask & (1 << b) != 0)
}

fn mask_of(set: &MultiIndex) -> u32 {
    set.iter().fold(0, |m, b| m | (1 << b))
}

/// `Σ_S τ_S A_S`.
#[derive(Debug, Clone)]
pub struct SuperForm {
    terms: BTreeMap<u32, Form>,
}

impl SuperForm {
    pub fn zero() -> Self {
        SuperForm { terms: BTreeMap::new() }
    }

    /// A form with no `τ` factor.
    pub fn plain(a: Form) -> Self {
        let mut s = SuperForm::zero();
        s.push(0, a);
        s
    }

    pub fn terms(&self) -> &BTreeMap<u32, Form> {
        &self.terms
    }

    /// Add `τ_mask f` into the sum.
    pub fn push(&mut self, mask: u32, f: Form) {
        if f.is_empty() {
            return;
        }
        match self.terms.get_mut(&mask) {
            Some(cur) => {
                *cur = cur.plus(&f);
                if cur.is_empty() {
                    self.terms.remove(&mask);
                }
            }
            None => {
                self.terms.insert(mask, f);
            }
        }
    }

    pub fn component(&self, mask: u32) -> Option<&Form> {
        self.terms.get(&mask)
    }

    /// Homogeneity degree in `τ`, if homogeneous.
    pub fn tau_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.count_ones());
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    pub fn plus(&self, other: &SuperForm) -> SuperForm {
        let mut out = self.clone();
        for (m, f) in &other.terms {
            out.push(*m, f.clone());
        }
        out
    }

    pub fn neg(&self) -> SuperForm {
        SuperForm { terms: self.terms.iter().map(|(m, f)| (*m, f.neg())).collect() }
    }

    pub fn minus(&self, other: &SuperForm) -> SuperForm {
        self.plus(&other.neg())
    }

    pub fn scale_f64(&self, s: f64) -> SuperForm {
        SuperForm { terms: self.terms.iter().map(|(m, f)| (*m, f.scale_f64(s))).collect() }
    }

    /// Right product with the `τ`-linear function `Σ_α f_α τ_α`.
    pub fn times_tau(&self, f: &[Expr]) -> SuperForm {
        let mut out = SuperForm::zero();
        for (m, form) in &self.terms {
            for (alpha, fa) in f.iter().enumerate() {
                if fa.is_zero() {
                    continue;
                }
                if let Some((mask, s)) = tau_merge(*m, 1 << alpha) {
                    out.push(mask, form.scale(fa).scale_f64(s));
                }
            }
        }
        out
    }

    /// Exterior derivative, with `τ` treated as constants.
    pub fn d(&self) -> Result<SuperForm, BracketError> {
        let mut out = SuperForm::zero();
        for (m, f) in &self.terms {
            out.push(*m, f.d()?);
        }
        Ok(out)
    }

    pub fn eval(&self, pt: &[f64]) -> Result<BTreeMap<u32, NumTensor>, EvalError> {
        self.terms.iter().map(|(m, f)| Ok((*m, f.eval(pt)?))).collect()
    }

    /// Largest coefficient over all `τ` monomials and points.
    pub fn max_abs_at(&self, points: &[Vec<f64>]) -> Result<f64, EvalError> {
        let mut worst: f64 = 0.0;
        for f in self.terms.values() {
            worst = worst.max(super::max_abs_at(f, points)?);
        }
        Ok(worst)
    }
}

/// `Σ_S τ_S X_S` for vector fields `X_S`.
#[derive(Debug, Clone)]
pub struct SuperVector {
    terms: BTreeMap<u32, Multivector>,
}

impl SuperVector {
    pub fn zero() -> Self {
        SuperVector { terms: BTreeMap::new() }
    }

    pub fn terms(&self) -> &BTreeMap<u32, Multivector> {
        &self.terms
    }

    pub fn component(&self, mask: u32) -> Option<&Multivector> {
        self.terms.get(&mask)
    }

    fn insert(&mut self, mask: u32, v: Multivector) {
        self.terms.insert(mask, v);
    }
}

/// A superform and its Hamiltonian field, component by component.
#[derive(Debug, Clone)]
pub struct SuperPair {
    pub form: SuperForm,
    pub xi: SuperVector,
}

impl SuperPair {
    /// Wrap an `(n-1)`-form pair with no `τ` factor.
    pub fn plain(pair: &super::HamiltonianPair) -> SuperPair {
        let mut xi = SuperVector::zero();
        xi.insert(0, pair.xi.clone());
        SuperPair { form: SuperForm::plain(pair.form.clone()), xi }
    }

    pub fn tau_degree(&self) -> Option<u32> {
        self.form.tau_degree()
    }
}

/// `^s a = Σ_S τ_S dx^S ∧ a` over `|S| = n - 1 - deg a`.
pub(crate) fn super_of(space: &PhaseSpace, a: &Form) -> SuperForm {
    let n = space.n();
    assert!(a.degree() < n, "superform of a form of degree >= n");
    let mut out = SuperForm::zero();
    for set in MultiIndex::subsets(n, n - 1 - a.degree()) {
        let mut f = Form::scalar(space.chart(), Expr::one());
        for alpha in set.iter() {
            f = f.wedge(&space.dx(alpha)).expect("chart");
        }
        out.push(mask_of(&set), f.wedge(a).expect("chart"));
    }
    out
}

pub(crate) fn superize(alg: &Algebra<'_>, a: &Form) -> Result<SuperPair, BracketError> {
    let form = super_of(alg.space(), a);
    let mut xi = SuperVector::zero();
    for (mask, comp) in form.terms() {
        let v = alg.solve(comp)?;
        let residual = alg.residual(&alg.pair_defect(comp, &v)?)?;
        if residual > alg.tol() {
            return Err(BracketError::NotInPp1 { subset: mask_indices(*mask).collect(), residual });
        }
        xi.insert(*mask, v);
    }
    Ok(SuperPair { form, xi })
}

/// `{A, B}_s = Σ_{S,T} τ_S τ_T Ξ(B_T) ⨼ Ξ(A_S) ⨼ Ω`.
pub(crate) fn sbracket(alg: &Algebra<'_>, a: &SuperPair, b: &SuperPair) -> Result<SuperForm, BracketError> {
    let mut out = SuperForm::zero();
    for (s, xa) in a.xi.terms() {
        let inner = alg.omega().contract(xa)?;
        for (t, xb) in b.xi.terms() {
            if let Some((mask, sign)) = tau_merge(*s, *t) {
                out.push(mask, inner.contract(xb)?.scale_f64(sign));
            }
        }
    }
    Ok(out)
}

//! Sparse graded exterior algebra over a chart.
//!
//! Forms and multivectors store one coefficient per strictly increasing
//! multi-index. Contraction follows the leading-slot convention:
//! `(X1 ^ X2) ⨼ a = a(X1, X2, ...)`.

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::chart::Chart;
use crate::expr::{EvalError, Expr, SubstituteError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("operands live on different charts")]
    ChartMismatch,
    #[error("degree mismatch: {0}")]
    Degree(String),
    #[error("opaque coefficient cannot be differentiated further")]
    OpaqueOrder,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Substitute(#[from] SubstituteError),
}

/// Strictly increasing coordinate indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(SmallVec<[u16; 8]>);

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl MultiIndex {
    pub fn empty() -> Self {
        MultiIndex(SmallVec::new())
    }

    /// Sort `idx`, returning the canonical index and the permutation sign.
    /// `None` when an index repeats (the component is zero).
    pub fn canonical(idx: &[usize]) -> Option<(MultiIndex, f64)> {
        let mut v: SmallVec<[u16; 8]> = idx.iter().map(|&i| i as u16).collect();
        let mut sign = 1.0;
        // insertion sort counting swaps; indices are short
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some((MultiIndex(v), sign))
    }

    pub fn from_sorted(idx: &[usize]) -> MultiIndex {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        MultiIndex(idx.iter().map(|&i| i as u16).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, pos: usize) -> usize {
        self.0[pos] as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i as usize)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&(i as u16)).is_ok()
    }

    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&(i as u16)).ok()
    }

    pub fn without_pos(&self, pos: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v.remove(pos);
        MultiIndex(v)
    }

    /// Sign and result of sorting the concatenation `self ++ other`.
    pub fn merge(&self, other: &MultiIndex) -> Option<(MultiIndex, f64)> {
        let mut out: SmallVec<[u16; 8]> = SmallVec::with_capacity(self.len() + other.len());
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut inversions = 0usize;
        while i < a.len() && j < b.len() {
            if a[i] == b[j] {
                return None;
            }
            if a[i] < b[j] {
                out.push(a[i]);
                i += 1;
            } else {
                // b[j] jumps over the remaining elements of a
                inversions += a.len() - i;
                out.push(b[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        let sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((MultiIndex(out), sign))
    }

    /// If `sub ⊂ self`, the complement `R` and the sign with `self = sign · (sub ++ R)`.
    pub fn split_front(&self, sub: &MultiIndex) -> Option<(MultiIndex, f64)> {
        let mut rest: SmallVec<[u16; 8]> = SmallVec::new();
        let mut k = 0;
        for &i in self.0.iter() {
            if k < sub.0.len() && sub.0[k] == i {
                k += 1;
            } else {
                rest.push(i);
            }
        }
        if k != sub.0.len() {
            return None;
        }
        let rest = MultiIndex(rest);
        let (_, sign) = sub.merge(&rest)?;
        Some((rest, sign))
    }

    /// All strictly increasing `k`-subsets of `0..n`, in lexicographic order.
    pub fn subsets(n: usize, k: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        if k > n {
            return out;
        }
        let mut cur: Vec<usize> = (0..k).collect();
        loop {
            out.push(MultiIndex::from_sorted(&cur));
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if cur[i] < n - k + i {
                    cur[i] += 1;
                    for j in i + 1..k {
                        cur[j] = cur[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    return out;
                }
            }
        }
    }

    /// Subsets of an explicit index list.
    pub fn subsets_of(items: &[usize], k: usize) -> Vec<MultiIndex> {
        MultiIndex::subsets(items.len(), k)
            .into_iter()
            .map(|s| MultiIndex::from_sorted(&s.iter().map(|p| items[p]).collect::<Vec<_>>()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Lower;
#[derive(Debug, Clone, Copy)]
pub struct Upper;

/// Graded antisymmetric tensor with expression coefficients.
pub struct Tensor<K> {
    chart: Arc<Chart>,
    degree: usize,
    terms: BTreeMap<MultiIndex, Expr>,
    kind: PhantomData<K>,
}

impl<K> Clone for Tensor<K> {
    fn clone(&self) -> Self {
        Tensor { chart: self.chart.clone(), degree: self.degree, terms: self.terms.clone(), kind: PhantomData }
    }
}

pub type Form = Tensor<Lower>;
pub type Multivector = Tensor<Upper>;

impl<K> fmt::Debug for Tensor<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.chart.names();
        let mut m = f.debug_map();
        for (k, v) in &self.terms {
            let key: Vec<&str> = k.iter().map(|i| names[i].as_str()).collect();
            m.entry(&key, &v.print(&self.chart));
        }
        m.finish()
    }
}

impl<K> Tensor<K> {
    pub fn zero(chart: &Arc<Chart>, degree: usize) -> Self {
        Tensor { chart: chart.clone(), degree, terms: BTreeMap::new(), kind: PhantomData }
    }

    pub fn scalar(chart: &Arc<Chart>, e: Expr) -> Self {
        let mut t = Tensor::zero(chart, 0);
        t.add_term(&[], e);
        t
    }

    /// The basis element `e_{i1} ^ ... ^ e_{ir}` in the given order.
    pub fn basis(chart: &Arc<Chart>, idx: &[usize]) -> Self {
        let mut t = Tensor::zero(chart, idx.len());
        t.add_term(idx, Expr::one());
        t
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, Expr> {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, idx: &[usize]) -> Expr {
        match MultiIndex::canonical(idx) {
            Some((k, s)) => self.terms.get(&k).map(|e| e.scale(s)).unwrap_or_else(Expr::zero),
            None => Expr::zero(),
        }
    }

    /// Add `coef · e_idx`, canonicalizing the index order.
    pub fn add_term(&mut self, idx: &[usize], coef: Expr) {
        assert_eq!(idx.len(), self.degree, "term degree");
        if coef.is_zero() || self.degree > self.chart.dim() {
            return;
        }
        if let Some((k, s)) = MultiIndex::canonical(idx) {
            self.add_canonical(k, coef.scale(s));
        }
    }

    fn add_canonical(&mut self, k: MultiIndex, coef: Expr) {
        if coef.is_zero() {
            return;
        }
        let merged = match self.terms.remove(&k) {
            Some(old) => old.add(&coef),
            None => coef,
        };
        if !merged.is_zero() {
            self.terms.insert(k, merged);
        }
    }

    fn check(&self, other: &Tensor<K>) -> Result<(), ExteriorError> {
        if !self.chart.same(&other.chart) {
            return Err(ExteriorError::ChartMismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Tensor<K>) -> Result<Tensor<K>, ExteriorError> {
        self.check(other)?;
        if self.degree != other.degree {
            return Err(ExteriorError::Degree(format!("{} + {}", self.degree, other.degree)));
        }
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_canonical(k.clone(), v.clone());
        }
        Ok(out)
    }

    /// Sum of same-degree tensors on the same chart; panics otherwise.
    pub fn plus(&self, other: &Tensor<K>) -> Tensor<K> {
        self.try_add(other).expect("plus: incompatible operands")
    }

    pub fn minus(&self, other: &Tensor<K>) -> Tensor<K> {
        self.plus(&other.neg())
    }

    pub fn neg(&self) -> Tensor<K> {
        self.map(|e| e.neg())
    }

    pub fn scale(&self, s: &Expr) -> Tensor<K> {
        self.map(|e| s.mul(e))
    }

    pub fn scale_f64(&self, s: f64) -> Tensor<K> {
        self.map(|e| e.scale(s))
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Tensor<K> {
        let mut out = Tensor::zero(&self.chart, self.degree);
        for (k, v) in &self.terms {
            out.add_canonical(k.clone(), f(v));
        }
        out
    }

    /// Graded product: `(a ^ b)` for forms, `(X ^ Y)` for multivectors.
    pub fn wedge(&self, other: &Tensor<K>) -> Result<Tensor<K>, ExteriorError> {
        self.check(other)?;
        let mut out = Tensor::zero(&self.chart, self.degree + other.degree);
        if out.degree > self.chart.dim() {
            return Ok(out);
        }
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                if let Some((k, s)) = ka.merge(kb) {
                    out.add_canonical(k, va.mul(vb).scale(s));
                }
            }
        }
        Ok(out)
    }

    pub fn eval(&self, pt: &[f64]) -> Result<NumTensor, EvalError> {
        let mut terms = BTreeMap::new();
        for (k, v) in &self.terms {
            let x = v.eval(pt)?;
            if x != 0.0 {
                terms.insert(k.clone(), x);
            }
        }
        Ok(NumTensor { dim: self.chart.dim(), degree: self.degree, terms })
    }

    /// Canonical-order (indices, printed coefficient) pairs for golden files.
    pub fn debug_terms(&self) -> Vec<(Vec<usize>, String)> {
        self.terms.iter().map(|(k, v)| (k.to_vec(), v.print(&self.chart))).collect()
    }

    /// Whether any coefficient or basis element involves the given coordinates.
    pub fn touches(&self, coords: &[usize]) -> bool {
        self.terms.iter().any(|(k, v)| {
            v.has_jet() || coords.iter().any(|&c| k.contains(c)) || v.variables().iter().any(|c| coords.contains(c))
        })
    }

    /// Move to another chart with identical coordinates, e.g. after a rebuild.
    pub fn rechart(&self, chart: &Arc<Chart>) -> Tensor<K> {
        assert_eq!(chart.dim(), self.chart.dim());
        Tensor { chart: chart.clone(), degree: self.degree, terms: self.terms.clone(), kind: PhantomData }
    }
}

fn derivative_coords(e: &Expr, dim: usize) -> Result<Vec<usize>, ExteriorError> {
    match e.jet_headroom() {
        Some(0) => Err(ExteriorError::OpaqueOrder),
        Some(_) => Ok((0..dim).collect()),
        None => Ok(e.variables().into_iter().collect()),
    }
}

impl Form {
    /// The coordinate 1-form `dq^i`.
    pub fn dq(chart: &Arc<Chart>, i: usize) -> Form {
        Form::basis(chart, &[i])
    }

    pub fn d(&self) -> Result<Form, ExteriorError> {
        let dim = self.chart.dim();
        let mut out = Form::zero(&self.chart, self.degree + 1);
        if out.degree > dim {
            return Ok(out);
        }
        for (k, v) in &self.terms {
            for j in derivative_coords(v, dim)? {
                if k.contains(j) {
                    continue;
                }
                let dv = v.derivative(j);
                if dv.is_zero() {
                    continue;
                }
                let single = MultiIndex::from_sorted(&[j]);
                if let Some((key, s)) = single.merge(k) {
                    out.add_canonical(key, dv.scale(s));
                }
            }
        }
        Ok(out)
    }

    /// `X ⨼ self`: X fills the leading slots.
    pub fn contract(&self, x: &Multivector) -> Result<Form, ExteriorError> {
        if !self.chart.same(&x.chart) {
            return Err(ExteriorError::ChartMismatch);
        }
        if x.degree > self.degree {
            return Err(ExteriorError::Degree(format!("contract {}-vector into {}-form", x.degree, self.degree)));
        }
        let mut out = Form::zero(&self.chart, self.degree - x.degree);
        for (kx, vx) in &x.terms {
            for (ka, va) in &self.terms {
                if let Some((rest, s)) = ka.split_front(kx) {
                    out.add_canonical(rest, vx.mul(va).scale(s));
                }
            }
        }
        Ok(out)
    }

    /// Cartan's formula `L_ξ a = d(ξ ⨼ a) + ξ ⨼ da`.
    pub fn lie_derivative(&self, xi: &Multivector) -> Result<Form, ExteriorError> {
        if xi.degree != 1 {
            return Err(ExteriorError::Degree("Lie derivative needs a vector field".into()));
        }
        let a = if self.degree == 0 { Form::zero(&self.chart, 0) } else { self.contract(xi)?.d()? };
        let b = self.d()?.contract(xi)?;
        a.try_add(&b)
    }

    /// Pull back along `source coordinate i = map[i]` (expressions on `target`).
    pub fn pullback(&self, target: &Arc<Chart>, map: &[Expr]) -> Result<Form, ExteriorError> {
        assert_eq!(map.len(), self.chart.dim());
        let mut differentials: Vec<Option<Form>> = vec![None; map.len()];
        let mut out = Form::zero(target, self.degree);
        for (k, v) in &self.terms {
            let mut acc = Form::scalar(target, v.substitute(map)?);
            for i in k.iter() {
                if differentials[i].is_none() {
                    differentials[i] = Some(Form::scalar(target, map[i].clone()).d()?);
                }
                acc = acc.wedge(differentials[i].as_ref().unwrap())?;
            }
            out = out.try_add(&acc)?;
        }
        Ok(out)
    }
}

impl Multivector {
    /// The coordinate vector field `∂/∂q^i`.
    pub fn partial(chart: &Arc<Chart>, i: usize) -> Multivector {
        Multivector::basis(chart, &[i])
    }

    /// A vector field from one expression per coordinate.
    pub fn vector(chart: &Arc<Chart>, comps: &[Expr]) -> Multivector {
        let mut v = Multivector::zero(chart, 1);
        for (i, c) in comps.iter().enumerate() {
            v.add_term(&[i], c.clone());
        }
        v
    }

    pub fn component(&self, i: usize) -> Expr {
        self.coefficient(&[i])
    }

    /// Lie bracket of vector fields, `[X,Y]^c = X(Y^c) - Y(X^c)`.
    pub fn lie_bracket(&self, other: &Multivector) -> Result<Multivector, ExteriorError> {
        self.check(other)?;
        if self.degree != 1 || other.degree != 1 {
            return Err(ExteriorError::Degree("Lie bracket needs vector fields".into()));
        }
        let dim = self.chart.dim();
        let apply = |x: &Multivector, f: &Expr| -> Result<Expr, ExteriorError> {
            let mut acc = Expr::zero();
            for j in derivative_coords(f, dim)? {
                let xj = x.component(j);
                if xj.is_zero() {
                    continue;
                }
                acc = acc.add(&xj.mul(&f.derivative(j)));
            }
            Ok(acc)
        };
        let mut out = Multivector::zero(&self.chart, 1);
        for c in 0..dim {
            let yc = other.component(c);
            let xc = self.component(c);
            let v = apply(self, &yc)?.sub(&apply(other, &xc)?);
            out.add_term(&[c], v);
        }
        Ok(out)
    }

    /// Dense component vector of a 1-vector at a point.
    pub fn eval_vector(&self, pt: &[f64]) -> Result<Vec<f64>, EvalError> {
        assert_eq!(self.degree, 1);
        let mut out = vec![0.0; self.chart.dim()];
        for (k, v) in &self.terms {
            out[k.get(0)] = v.eval(pt)?;
        }
        Ok(out)
    }
}

/// A tensor evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NumTensor {
    pub dim: usize,
    pub degree: usize,
    pub terms: BTreeMap<MultiIndex, f64>,
}

impl NumTensor {
    pub fn zero(dim: usize, degree: usize) -> Self {
        NumTensor { dim, degree, terms: BTreeMap::new() }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        match MultiIndex::canonical(idx) {
            Some((k, s)) => s * self.terms.get(&k).copied().unwrap_or(0.0),
            None => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add_scaled(&mut self, other: &NumTensor, s: f64) {
        assert_eq!(self.degree, other.degree);
        for (k, v) in &other.terms {
            *self.terms.entry(k.clone()).or_insert(0.0) += s * v;
        }
    }

    pub fn diff(&self, other: &NumTensor) -> NumTensor {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    /// Interior product with a dense vector in the first slot.
    pub fn interior(&self, v: &[f64]) -> NumTensor {
        let mut out = NumTensor::zero(self.dim, self.degree.saturating_sub(1));
        if self.degree == 0 {
            return out;
        }
        for (k, c) in &self.terms {
            for pos in 0..k.len() {
                let w = v[k.get(pos)];
                if w == 0.0 {
                    continue;
                }
                let s = if pos % 2 == 0 { 1.0 } else { -1.0 };
                *out.terms.entry(k.without_pos(pos)).or_insert(0.0) += s * w * c;
            }
        }
        out
    }

    /// Fill the leading slots with `vs` in order: `a(v1, v2, ...)`.
    pub fn fill(&self, vs: &[Vec<f64>]) -> NumTensor {
        let mut cur = self.clone();
        for v in vs {
            cur = cur.interior(v);
        }
        cur
    }

    /// Scalar value of a 0-form.
    pub fn scalar(&self) -> f64 {
        assert_eq!(self.degree, 0);
        self.terms.get(&MultiIndex::empty()).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn chart(n: usize) -> Arc<Chart> {
        let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
        Arc::new(Chart::new(&names).unwrap())
    }

    #[test]
    fn canonical_sign_and_repeats() {
        assert_eq!(MultiIndex::canonical(&[2, 0, 1]).unwrap(), (MultiIndex::from_sorted(&[0, 1, 2]), 1.0));
        assert_eq!(MultiIndex::canonical(&[1, 0, 2]).unwrap().1, -1.0);
        assert!(MultiIndex::canonical(&[1, 1]).is_none());
    }

    #[test]
    fn subsets_enumerate_lexicographically() {
        let s = MultiIndex::subsets(4, 2);
        assert_eq!(s.len(), 6);
        assert_eq!(s[0].to_vec(), vec![0, 1]);
        assert_eq!(s[5].to_vec(), vec![2, 3]);
        assert_eq!(MultiIndex::subsets(3, 0).len(), 1);
        assert!(MultiIndex::subsets(2, 3).is_empty());
    }

    #[test]
    fn wedge_basics() {
        let c = chart(3);
        let d1 = Form::dq(&c, 1);
        let d2 = Form::dq(&c, 2);
        assert!(d1.wedge(&d1).unwrap().is_empty());
        let a = d1.wedge(&d2).unwrap();
        let b = d2.wedge(&d1).unwrap();
        assert!(a.plus(&b).is_empty());
    }

    #[test]
    fn contraction_fills_leading_slots() {
        let c = chart(3);
        let x = Multivector::basis(&c, &[0, 1]);
        let a = Form::basis(&c, &[0, 1]);
        assert_eq!(a.contract(&x).unwrap().coefficient(&[]).as_const(), Some(1.0));
        // dq0^dq1^dq2 with ∂1 in slot one: -dq0^dq2
        let vol = Form::basis(&c, &[0, 1, 2]);
        let r = vol.contract(&Multivector::partial(&c, 1)).unwrap();
        assert_eq!(r.coefficient(&[0, 2]).as_const(), Some(-1.0));
    }

    #[test]
    fn degree_above_dimension_is_zero() {
        let c = chart(2);
        let a = Form::basis(&c, &[0, 1]);
        assert!(a.wedge(&Form::dq(&c, 0)).unwrap().is_empty());
        assert!(a.d().unwrap().is_empty());
    }

    #[test]
    fn chart_mismatch_is_an_error() {
        let a = Form::dq(&chart(2), 0);
        let b = Form::dq(&chart(2), 1);
        assert_eq!(a.wedge(&b).unwrap_err(), ExteriorError::ChartMismatch);
    }

    #[test]
    fn d_of_constant_and_cartan_on_functions() {
        let c = chart(2);
        let k = Form::scalar(&c, Expr::constant(3.0));
        assert!(k.d().unwrap().is_empty());
        let f = Form::scalar(&c, parse("q0^2*q1", &c).unwrap());
        let xi = Multivector::vector(&c, &[parse("q1", &c).unwrap(), Expr::one()]);
        let l = f.lie_derivative(&xi).unwrap();
        let pt = [0.7, -0.4];
        let want = 2.0 * 0.7 * -0.4 * -0.4 + 0.49;
        assert!((l.eval(&pt).unwrap().scalar() - want).abs() < 1e-14);
    }

    #[test]
    fn pullback_of_area_form_is_jacobian() {
        let c = chart(2);
        let polar = Arc::new(Chart::new(&["r", "t"]).unwrap());
        let r = Expr::var(0);
        let t = Expr::var(1);
        let map = vec![r.mul(&t.cos()), r.mul(&t.sin())];
        let area = Form::basis(&c, &[0, 1]);
        let pb = area.pullback(&polar, &map).unwrap();
        let v = pb.eval(&[1.7, 0.3]).unwrap().get(&[0, 1]);
        assert!((v - 1.7).abs() < 1e-14);
    }

    #[test]
    fn numeric_fill_matches_symbolic_contraction() {
        let c = chart(3);
        let a = Form::basis(&c, &[0, 1, 2]).scale(&parse("q0 + 2", &c).unwrap());
        let pt = [0.5, 0.0, 0.0];
        let v1 = vec![1.0, 2.0, 0.0];
        let v2 = vec![0.0, 1.0, 3.0];
        let x = Multivector::vector(&c, &v1.iter().map(|&v| Expr::constant(v)).collect::<Vec<_>>())
            .wedge(&Multivector::vector(&c, &v2.iter().map(|&v| Expr::constant(v)).collect::<Vec<_>>()))
            .unwrap();
        let sym = a.contract(&x).unwrap().eval(&pt).unwrap();
        let num = a.eval(&pt).unwrap().fill(&[v1, v2]);
        assert!(sym.diff(&num).max_abs() < 1e-14);
    }
}

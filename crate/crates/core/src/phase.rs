//! Multimomentum phase space `M = Λⁿ T*(X × Y)` and its canonical forms.
//!
//! Coordinates are ordered base `x`, fiber `y`, then momenta. Each momentum
//! coordinate records how it embeds into the canonical components `p_I`
//! (I an increasing n-subset of the `n + k` base-and-fiber indices), so the
//! full chart, the Weyl restriction and the Maxwell constraint surface all
//! share one code path: `θ = g Σ_I p_I dq^I`.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{Chart, ChartError};
use crate::expr::{parse, Expr, ParseError};
use crate::exterior::{Form, MultiIndex, Multivector};
use crate::probe;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("need n >= 1 and k >= 1, got n={n}, k={k}")]
    Dimension { n: usize, k: usize },
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("density: {0}")]
    Parse(#[from] ParseError),
    #[error("density may depend on base coordinates only")]
    DensityNotBase,
    #[error("density is not positive at {point:?}")]
    DensityNotPositive { point: Vec<f64> },
    #[error("unknown chart kind `{0}`")]
    Kind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    /// Every canonical momentum `p_I` is a coordinate.
    Full,
    /// Only `ε` and `p^α_i`; momenta with two or more fiber indices are pinned to zero.
    Weyl,
    /// Weyl restriction over `T*X` with `p^{A_α β} + p^{A_β α} = 0` built in.
    Maxwell,
}

/// Chart construction parameters.
#[derive(Debug, Clone)]
pub struct PhaseSpec {
    pub n: usize,
    pub k: usize,
    pub kind: PhaseKind,
    pub base: Option<Vec<String>>,
    pub fiber: Option<Vec<String>>,
    pub density: Option<String>,
}

impl PhaseSpec {
    pub fn new(kind: PhaseKind, n: usize, k: usize) -> Self {
        PhaseSpec { n, k, kind, base: None, fiber: None, density: None }
    }

    pub fn density(mut self, g: &str) -> Self {
        self.density = Some(g.to_string());
        self
    }

    pub fn base_names(mut self, names: &[&str]) -> Self {
        self.base = Some(names.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn fiber_names(mut self, names: &[&str]) -> Self {
        self.fiber = Some(names.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn build(&self) -> Result<PhaseSpace, PhaseError> {
        PhaseSpace::build(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasEntry {
    pub name: String,
    pub target: String,
    pub sign: f64,
}

/// Serializable chart description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDescription {
    pub n: usize,
    pub k: usize,
    pub kind: PhaseKind,
    pub density: String,
    pub coordinates: Vec<String>,
    pub aliases: Vec<AliasEntry>,
}

#[derive(Debug)]
pub struct PhaseSpace {
    n: usize,
    k: usize,
    kind: PhaseKind,
    chart: Arc<Chart>,
    density: Option<(String, Expr)>,
    embedding: Vec<Vec<(MultiIndex, f64)>>,
    canonical: BTreeMap<MultiIndex, Vec<(usize, f64)>>,
    theta: OnceLock<Form>,
    omega: OnceLock<Form>,
}

fn one_based(i: &MultiIndex) -> String {
    i.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join("_")
}

/// Canonical index of `p^{α...}_{i...}`: replace base slots `alphas` by fibers `fibers`.
pub fn substituted_index(n: usize, alphas: &[usize], fibers: &[usize]) -> Option<(MultiIndex, f64)> {
    let mut idx: Vec<usize> = (0..n).collect();
    for (&a, &i) in alphas.iter().zip(fibers) {
        idx[a] = n + i;
    }
    MultiIndex::canonical(&idx)
}

impl PhaseSpace {
    pub fn build(spec: &PhaseSpec) -> Result<PhaseSpace, PhaseError> {
        let (n, k) = (spec.n, spec.k);
        if n == 0 || k == 0 || (spec.kind == PhaseKind::Maxwell && k != n) {
            return Err(PhaseError::Dimension { n, k });
        }
        let base = spec.base.clone().unwrap_or_else(|| (1..=n).map(|a| format!("x{a}")).collect());
        let default_fiber = if spec.kind == PhaseKind::Maxwell { "A" } else { "y" };
        let fiber = spec.fiber.clone().unwrap_or_else(|| (1..=k).map(|i| format!("{default_fiber}{i}")).collect());
        if base.len() != n || fiber.len() != k {
            return Err(PhaseError::Dimension { n: base.len(), k: fiber.len() });
        }
        let mut names: Vec<String> = base.into_iter().chain(fiber).collect();
        let mut embedding: Vec<Vec<(MultiIndex, f64)>> = Vec::new();
        let mut aliases: Vec<(String, usize, f64)> = Vec::new();
        let eps_index = MultiIndex::from_sorted(&(0..n).collect::<Vec<_>>());
        let q = n + k;
        match spec.kind {
            PhaseKind::Full => {
                for set in MultiIndex::subsets(q, n) {
                    names.push(format!("p_{}", one_based(&set)));
                    embedding.push(vec![(set, 1.0)]);
                }
            }
            PhaseKind::Weyl => {
                names.push("eps".into());
                embedding.push(vec![(eps_index.clone(), 1.0)]);
                for a in 0..n {
                    for i in 0..k {
                        let (set, s) = substituted_index(n, &[a], &[i]).expect("distinct");
                        names.push(format!("p{}_{}", a + 1, i + 1));
                        embedding.push(vec![(set, s)]);
                    }
                }
            }
            PhaseKind::Maxwell => {
                names.push("eps".into());
                embedding.push(vec![(eps_index.clone(), 1.0)]);
                // P_{ab} := p^{A_a b} for a < b; p^{A_a b} sits on fiber a, base slot b
                for a in 0..n {
                    for b in a + 1..n {
                        let (i1, s1) = substituted_index(n, &[b], &[a]).expect("distinct");
                        let (i2, s2) = substituted_index(n, &[a], &[b]).expect("distinct");
                        names.push(format!("pA{}_{}", a + 1, b + 1));
                        embedding.push(vec![(i1, s1), (i2, -s2)]);
                    }
                }
            }
        }
        let mut chart = Chart::new(&names)?;
        let coord = |m: usize| q + m;
        match spec.kind {
            PhaseKind::Full => {
                let find = |set: &MultiIndex| embedding.iter().position(|e| &e[0].0 == set).map(coord);
                aliases.push(("eps".into(), find(&eps_index).unwrap(), 1.0));
                for a in 0..n {
                    for i in 0..k {
                        let (set, s) = substituted_index(n, &[a], &[i]).unwrap();
                        aliases.push((format!("p{}_{}", a + 1, i + 1), find(&set).unwrap(), s));
                    }
                }
                if n >= 2 && k >= 2 && n < 10 && k < 10 {
                    for a1 in 0..n {
                        for a2 in a1 + 1..n {
                            for i1 in 0..k {
                                for i2 in 0..k {
                                    if i1 == i2 {
                                        continue;
                                    }
                                    let (set, s) = substituted_index(n, &[a1, a2], &[i1, i2]).unwrap();
                                    let name = format!("p{}{}_{}{}", a1 + 1, a2 + 1, i1 + 1, i2 + 1);
                                    aliases.push((name, find(&set).unwrap(), s));
                                }
                            }
                        }
                    }
                }
            }
            PhaseKind::Weyl => {}
            PhaseKind::Maxwell => {
                // Weyl-style names p{b}_{a} = p^{A_a b}, signed through the constraint
                let mut m = 1;
                for a in 0..n {
                    for b in a + 1..n {
                        aliases.push((format!("p{}_{}", b + 1, a + 1), coord(m), 1.0));
                        aliases.push((format!("p{}_{}", a + 1, b + 1), coord(m), -1.0));
                        m += 1;
                    }
                }
            }
        }
        for (name, idx, s) in aliases {
            chart.add_alias(&name, idx, s)?;
        }
        let chart = Arc::new(chart);
        let mut canonical: BTreeMap<MultiIndex, Vec<(usize, f64)>> = BTreeMap::new();
        for (m, emb) in embedding.iter().enumerate() {
            for (set, s) in emb {
                canonical.entry(set.clone()).or_default().push((coord(m), *s));
            }
        }
        let density = match &spec.density {
            None => None,
            Some(text) => {
                let g = parse(text, &chart)?;
                if g.has_jet() || g.variables().iter().any(|&v| v >= n) {
                    return Err(PhaseError::DensityNotBase);
                }
                let mut pt = vec![0.0; chart.dim()];
                for x in probe::points(0x9d5, n, 50, -1.0, 1.0) {
                    pt[..n].copy_from_slice(&x);
                    match g.eval(&pt) {
                        Ok(v) if v > 0.0 => {}
                        _ => return Err(PhaseError::DensityNotPositive { point: x }),
                    }
                }
                Some((text.clone(), g))
            }
        };
        Ok(PhaseSpace {
            n,
            k,
            kind: spec.kind,
            chart,
            density,
            embedding,
            canonical,
            theta: OnceLock::new(),
            omega: OnceLock::new(),
        })
    }

    pub fn full(n: usize, k: usize) -> Result<PhaseSpace, PhaseError> {
        PhaseSpec::new(PhaseKind::Full, n, k).build()
    }

    pub fn weyl(n: usize, k: usize) -> Result<PhaseSpace, PhaseError> {
        PhaseSpec::new(PhaseKind::Weyl, n, k).build()
    }

    pub fn maxwell(n: usize) -> Result<PhaseSpace, PhaseError> {
        PhaseSpec::new(PhaseKind::Maxwell, n, n).build()
    }

    pub fn from_description(d: &ChartDescription) -> Result<PhaseSpace, PhaseError> {
        let mut spec = PhaseSpec::new(d.kind, d.n, d.k);
        if d.coordinates.len() >= d.n + d.k {
            spec.base = Some(d.coordinates[..d.n].to_vec());
            spec.fiber = Some(d.coordinates[d.n..d.n + d.k].to_vec());
        }
        if d.density.trim() != "1" && !d.density.trim().is_empty() {
            spec.density = Some(d.density.clone());
        }
        spec.build()
    }

    pub fn describe(&self) -> ChartDescription {
        ChartDescription {
            n: self.n,
            k: self.k,
            kind: self.kind,
            density: self.density.as_ref().map(|d| d.0.clone()).unwrap_or_else(|| "1".into()),
            coordinates: self.chart.names().to_vec(),
            aliases: self
                .chart
                .aliases()
                .iter()
                .map(|(name, s)| AliasEntry { name: name.clone(), target: self.chart.name(s.index).to_string(), sign: s.sign })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> PhaseKind {
        self.kind
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Number of base plus fiber coordinates.
    pub fn q_dim(&self) -> usize {
        self.n + self.k
    }

    pub fn momentum_count(&self) -> usize {
        self.embedding.len()
    }

    pub fn x(&self, alpha: usize) -> usize {
        assert!(alpha < self.n);
        alpha
    }

    pub fn y(&self, i: usize) -> usize {
        assert!(i < self.k);
        self.n + i
    }

    pub fn momentum(&self, m: usize) -> usize {
        self.q_dim() + m
    }

    pub fn embedding(&self, m: usize) -> &[(MultiIndex, f64)] {
        &self.embedding[m]
    }

    /// Chart coordinates (with signs) whose sum is the canonical component `p_I`.
    pub fn canonical_weights(&self, set: &MultiIndex) -> &[(usize, f64)] {
        self.canonical.get(set).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Canonical sets with at least one chart coordinate behind them.
    pub fn canonical_sets(&self) -> impl Iterator<Item = &MultiIndex> {
        self.canonical.keys()
    }

    /// `p_I` as an expression; zero when the component is pinned.
    pub fn canonical_momentum(&self, set: &MultiIndex) -> Expr {
        Expr::sum(&self.canonical_weights(set).iter().map(|&(c, s)| Expr::var(c).scale(s)).collect::<Vec<_>>())
    }

    /// `ε = p_{1..n}` as (coordinate, sign).
    pub fn eps(&self) -> (usize, f64) {
        let set = MultiIndex::from_sorted(&(0..self.n).collect::<Vec<_>>());
        self.canonical_weights(&set)[0]
    }

    /// `p^α_i` as an expression (0-based indices).
    pub fn p_weyl(&self, alpha: usize, i: usize) -> Expr {
        let (set, s) = substituted_index(self.n, &[alpha], &[i]).expect("distinct");
        self.canonical_momentum(&set).scale(s)
    }

    pub fn density(&self) -> Expr {
        self.density.as_ref().map(|d| d.1.clone()).unwrap_or_else(Expr::one)
    }

    pub fn density_text(&self) -> Option<&str> {
        self.density.as_ref().map(|d| d.0.as_str())
    }

    pub fn dx(&self, alpha: usize) -> Form {
        Form::dq(&self.chart, self.x(alpha))
    }

    pub fn partial(&self, c: usize) -> Multivector {
        Multivector::partial(&self.chart, c)
    }

    /// `ω = g dx¹ ∧ … ∧ dxⁿ`.
    pub fn volume(&self) -> Form {
        Form::basis(&self.chart, &(0..self.n).collect::<Vec<_>>()).scale(&self.density())
    }

    /// `ω_α = ∂_α ⨼ ω`.
    pub fn volume_alpha(&self, alpha: usize) -> Form {
        self.volume().contract(&self.partial(self.x(alpha))).expect("degree")
    }

    /// The Cartan–Poincaré form `θ = g Σ_I p_I dq^I`.
    pub fn theta(&self) -> &Form {
        self.theta.get_or_init(|| {
            let g = self.density();
            let mut out = Form::zero(&self.chart, self.n);
            for (set, weights) in &self.canonical {
                for &(c, s) in weights {
                    out.add_term(&set.to_vec(), g.mul(&Expr::var(c)).scale(s));
                }
            }
            out
        })
    }

    /// The pataplectic form `Ω = dθ`.
    pub fn omega(&self) -> &Form {
        self.omega.get_or_init(|| self.theta().d().expect("polynomial θ is differentiable"))
    }

    /// Map full-chart coordinates to expressions on this chart; pulls full-chart forms back here.
    pub fn embed_from(&self, full: &PhaseSpace) -> Vec<Expr> {
        assert_eq!((full.n, full.k), (self.n, self.k));
        let mut map: Vec<Expr> = (0..self.q_dim()).map(Expr::var).collect();
        for m in 0..full.momentum_count() {
            let (set, s) = &full.embedding[m][0];
            map.push(self.canonical_momentum(set).scale(*s));
        }
        map
    }

    /// The Weyl restriction of this chart (identity in shape for n = 1).
    pub fn restrict_weyl(&self) -> Result<PhaseSpace, PhaseError> {
        let mut spec = PhaseSpec::new(PhaseKind::Weyl, self.n, self.k);
        spec.base = Some(self.chart.names()[..self.n].to_vec());
        spec.fiber = Some(self.chart.names()[self.n..self.q_dim()].to_vec());
        spec.density = self.density_text().map(str::to_string);
        spec.build()
    }

    /// Point assembled from base, fiber and momentum values.
    pub fn point(&self, x: &[f64], y: &[f64], p: &[f64]) -> Vec<f64> {
        assert_eq!((x.len(), y.len(), p.len()), (self.n, self.k, self.momentum_count()));
        x.iter().chain(y).chain(p).copied().collect()
    }

    /// Canonical components `p_I` at a chart point.
    pub fn canonical_values(&self, pt: &[f64]) -> Vec<(MultiIndex, f64)> {
        self.canonical
            .iter()
            .map(|(set, w)| (set.clone(), w.iter().map(|&(c, s)| s * pt[c]).sum()))
            .filter(|(_, v)| *v != 0.0)
            .collect()
    }

    /// `⟨p, z⟩ = Σ_I p_I det Z_I` with `z_β = ∂_β + Σ_i v^i_β ∂_{y^i}`; `v` is row-major `k × n`.
    pub fn pairing(&self, pt: &[f64], v: &[f64]) -> f64 {
        let z = z_matrix(self.n, self.k, v);
        self.canonical_values(pt).iter().map(|(set, p)| p * minor(&z, set)).sum()
    }

    /// Seeded probe points; base in `[-1, 1]`, fibers and momenta in `[-1, 1]`.
    pub fn probe_points(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        probe::points(seed, self.dim(), count, -1.0, 1.0)
    }
}

/// `(n + k) × n` tangent matrix: identity on top, velocities below.
pub fn z_matrix(n: usize, k: usize, v: &[f64]) -> DMatrix<f64> {
    assert_eq!(v.len(), n * k);
    DMatrix::from_fn(n + k, n, |r, c| if r < n { if r == c { 1.0 } else { 0.0 } } else { v[(r - n) * n + c] })
}

pub fn minor(z: &DMatrix<f64>, rows: &MultiIndex) -> f64 {
    let n = z.ncols();
    DMatrix::from_fn(n, n, |r, c| z[(rows.get(r), c)]).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn coordinate_counts() {
        assert_eq!(PhaseSpace::full(1, 1).unwrap().dim(), 4);
        assert_eq!(PhaseSpace::full(2, 2).unwrap().dim(), 10);
        assert_eq!(PhaseSpace::full(2, 1).unwrap().dim(), 6);
        assert_eq!(PhaseSpace::weyl(2, 2).unwrap().dim(), 9);
        assert_eq!(PhaseSpace::maxwell(3).unwrap().dim(), 3 + 3 + 1 + 3);
    }

    #[test]
    fn weyl_names_follow_the_standard_layout() {
        let w = PhaseSpace::weyl(2, 1).unwrap();
        assert_eq!(w.chart().names(), &["x1", "x2", "y1", "eps", "p1_1", "p2_1"]);
    }

    #[test]
    fn one_dimensional_theta_and_omega() {
        let s = PhaseSpace::full(1, 1).unwrap();
        let th = s.theta();
        // names: x1, y1, p_1 (= ε), p_2 (= p)
        assert_eq!(th.coefficient(&[0]).print(s.chart()), "p_1");
        assert_eq!(th.coefficient(&[1]).print(s.chart()), "p_2");
        let om = s.omega();
        assert_eq!(om.coefficient(&[2, 0]).as_const(), Some(1.0));
        assert_eq!(om.coefficient(&[3, 1]).as_const(), Some(1.0));
        assert_eq!(om.terms().len(), 2);
    }

    #[test]
    fn flat_weyl_theta_matches_eps_omega_plus_momenta() {
        let s = PhaseSpace::weyl(2, 1).unwrap();
        let c = s.chart();
        let v = |n: &str| Expr::var(c.index_of(n).unwrap());
        let mut want = s.volume().scale(&v("eps"));
        for a in 0..2 {
            let term = Form::dq(c, 2).wedge(&s.volume_alpha(a)).unwrap().scale(&v(&format!("p{}_1", a + 1)));
            want = want.plus(&term);
        }
        let pt = s.probe_points(1, 1).remove(0);
        assert!(s.theta().minus(&want).eval(&pt).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn alias_signs_round_trip() {
        let s = PhaseSpace::full(2, 2).unwrap();
        for (name, sym) in s.chart().aliases() {
            let e = parse(name, s.chart()).unwrap();
            let mut pt = vec![0.0; s.dim()];
            pt[sym.index] = 1.0;
            assert_eq!(e.eval(&pt).unwrap(), sym.sign, "{name}");
        }
        // p^{12}_{12} and p^{12}_{21} are the same coordinate with opposite signs
        let a = s.chart().resolve("p12_12").unwrap();
        let b = s.chart().resolve("p12_21").unwrap();
        assert_eq!(a.index, b.index);
        assert_eq!(a.sign, -b.sign);
    }

    #[test]
    fn pairing_examples() {
        let w = PhaseSpace::weyl(1, 1).unwrap();
        assert_eq!(w.pairing(&[0.0, 0.0, 1.0, 2.0], &[3.0]), 7.0);
        let f = PhaseSpace::full(2, 2).unwrap();
        let mut pt = vec![0.0; f.dim()];
        let sym = f.chart().resolve("p12_12").unwrap();
        pt[sym.index] = sym.sign;
        let v = [0.3, -1.1, 0.7, 2.0];
        let want = v[0] * v[3] - v[1] * v[2];
        assert!((f.pairing(&pt, &v) - want).abs() < 1e-14);
    }

    #[test]
    fn density_validation() {
        assert_eq!(PhaseSpec::new(PhaseKind::Weyl, 2, 1).density("y1").build().unwrap_err(), PhaseError::DensityNotBase);
        assert!(matches!(
            PhaseSpec::new(PhaseKind::Weyl, 2, 1).density("x1").build(),
            Err(PhaseError::DensityNotPositive { .. })
        ));
        assert!(PhaseSpec::new(PhaseKind::Weyl, 2, 1).density("2 + x1").build().is_ok());
    }

    #[test]
    fn maxwell_constraint_is_built_in() {
        let m = PhaseSpace::maxwell(3).unwrap();
        let c = m.chart();
        let a = parse("p2_1 + p1_2", c).unwrap();
        assert!(a.is_zero() || a.eval(&m.probe_points(2, 1)[0]).unwrap() == 0.0);
    }

    #[test]
    fn description_round_trips_through_json() {
        let s = PhaseSpec::new(PhaseKind::Weyl, 2, 1).density("1 + x1^2").build().unwrap();
        let text = serde_json::to_string(&s.describe()).unwrap();
        let back: ChartDescription = serde_json::from_str(&text).unwrap();
        let t = PhaseSpace::from_description(&back).unwrap();
        assert_eq!(t.chart().names(), s.chart().names());
        assert_eq!(t.density_text(), Some("1 + x1^2"));
    }
}

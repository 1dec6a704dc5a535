//! Leapfrog integration of the Weyl Hamilton equations
//! `∂_α y = ∂H/∂p^α`, `Σ_α ∂_α p^α = -∂H/∂y` for scalar fields on a periodic
//! two-dimensional rectangle, and discrete checks along the computed graphs.
//!
//! The time momenta `p⁰` are stepped; the spatial momenta `p¹` are rebuilt from
//! `∂_x y = ∂H/∂p¹` at every level.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brackets::{observables, Algebra, BracketError};
use crate::expr::{EvalError, Expr};
use crate::exterior::{ExteriorError, Form};
use crate::legendre::{hamiltonian_tensor_at, stress_energy};
use crate::phase::{minor, z_matrix, PhaseSpace};
use crate::systems::ScalarField;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("CFL violation: c h_t / h_x = {ratio} > 1")]
    Cfl { ratio: f64 },
    #[error("unsupported system: {0}")]
    Unsupported(String),
    #[error("region {0}")]
    Region(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Bracket(#[from] BracketError),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convention for `ε` along a solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// `ε = 0`, so `w = H`.
    #[default]
    None,
    /// `ε` chosen node by node so that `H = 0`.
    H0,
}

/// `[0, steps h_t] × [0, length)` with `nx` periodic nodes in space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub length: f64,
    pub ht: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(nx: usize, length: f64, ht: f64, steps: usize) -> Self {
        Grid { nx, length, ht, steps }
    }

    /// `h_t = ratio h_x` with the number of steps covering `t_end`.
    pub fn with_ratio(nx: usize, length: f64, ratio: f64, t_end: f64) -> Self {
        let ht = ratio * length / nx as f64;
        let steps = (t_end / ht).round() as usize;
        Grid { nx, length, ht, steps }
    }

    pub fn hx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.ht
    }

    pub fn x(&self, j: usize) -> f64 {
        (j % self.nx) as f64 * self.hx()
    }
}

/// Node index box `[t0, t1] × [x0, x1]`; `x1` may exceed `nx` to wrap around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub t0: usize,
    pub t1: usize,
    pub x0: usize,
    pub x1: usize,
}

/// Field values on one slice, indexed `i nx + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub y: Vec<f64>,
    pub p0: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub grid: Grid,
    pub k: usize,
    pub gauge: Gauge,
    /// `y[n][i nx + j]`.
    pub y: Vec<Vec<f64>>,
    pub p0: Vec<Vec<f64>>,
    /// Rebuilt from `∂_x y = ∂H/∂p¹` with centered differences.
    pub p1: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
}

impl FieldSolution {
    pub fn levels(&self) -> usize {
        self.y.len()
    }
}

/// Worst Hamilton-equation defects over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonResidual {
    /// `|∂_α y - ∂H/∂p^α|`.
    pub first: f64,
    /// `|Σ_α ∂_α p^α + ∂H/∂y|`.
    pub second: f64,
    /// `|∂(q^{μ₁}, q^{μ₂})/∂(x⁰, x¹) - ∂H/∂p_{μ₁μ₂}|` over the Weyl components.
    pub jacobian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StressResidual {
    /// `max |Σ_α ∂_α S^α_β|` per `β`.
    pub divergence: [f64; 2],
    /// `max |Σ_α ∂_α S^α_β - ∂L/∂x^β|`.
    pub residual: [f64; 2],
    /// `max |Σ_α ∂_α H^α_β - ∂H/∂x^β|` with `H^α_β` taken on the phase side.
    pub tensor_residual: [f64; 2],
    /// `max |H^α_β + S^α_β|`.
    pub tensor_match: f64,
}

/// Slice integrals of the brackets of `P_g`, `Q^f`, `η₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceBrackets {
    pub pq: f64,
    /// `∫ f⁰ g ω₀`.
    pub target: f64,
    pub qq: f64,
    pub pp: f64,
    /// `d/dt ∫ Q^f` by centered differences.
    pub dq_dt: f64,
    /// `∫ {η₀, Q^f} + Φ^{∂f/∂t}`.
    pub eta_q: f64,
    pub dp_dt: f64,
    /// `∫ {η₀, P_g} + Π_{∂g/∂t}`.
    pub eta_p: f64,
}

/// Exact standing wave `A cos(ωt) cos(κx)` of the linear equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandingWave {
    pub amp: f64,
    pub kappa: f64,
    pub omega: f64,
    pub g00: f64,
}

impl StandingWave {
    /// `ω² = g₀₀ (m² - κ²/g₁₁)`.
    pub fn new(amp: f64, kappa: f64, mass2: f64, g00: f64, g11: f64) -> Self {
        StandingWave { amp, kappa, omega: (g00 * (mass2 - kappa * kappa / g11)).sqrt(), g00 }
    }

    pub fn y(&self, t: f64, x: f64) -> f64 {
        self.amp * (self.omega * t).cos() * (self.kappa * x).cos()
    }

    pub fn p0(&self, t: f64, x: f64) -> f64 {
        -self.amp * self.omega * (self.omega * t).sin() * (self.kappa * x).cos() / self.g00
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn initial(&self, grid: &Grid) -> Slice {
        Slice {
            y: (0..grid.nx).map(|j| self.y(0.0, grid.x(j))).collect(),
            p0: (0..grid.nx).map(|j| self.p0(0.0, grid.x(j))).collect(),
        }
    }
}

/// `log₂(e_i / e_{i+1})` for errors on successively halved meshes.
pub fn convergence_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Leapfrog integrator for a scalar-field system with constant diagonal metric on `n = 2`.
#[derive(Debug)]
pub struct WeylIntegrator<'a> {
    field: &'a ScalarField,
    g00: f64,
    g11: f64,
    density: f64,
    h: Expr,
    dh: Vec<Expr>,
    /// `∂V/∂y^i`.
    dv: Vec<Expr>,
    potential: Expr,
    /// Coordinate and factor with `p^α_i = factor · coordinate`.
    p_coord: Vec<Vec<(usize, f64)>>,
    eps: (usize, f64),
}

fn single_coordinate(e: &Expr) -> (usize, f64) {
    let c = *e.variables().iter().next().expect("momentum coordinate");
    (c, e.derivative(c).as_const().expect("linear"))
}

fn constant(e: &Expr, what: &str) -> Result<f64, DynamicsError> {
    e.as_const().ok_or_else(|| DynamicsError::Unsupported(format!("{what} must be constant")))
}

impl<'a> WeylIntegrator<'a> {
    pub fn new(field: &'a ScalarField) -> Result<Self, DynamicsError> {
        let sp = field.space();
        let n = sp.n();
        if n > 2 {
            return Err(DynamicsError::Unsupported(format!("time integration needs n <= 2, got {n}")));
        }
        for a in 0..n {
            for b in 0..n {
                if a != b && constant(&field.metric[a][b], "metric")? != 0.0 {
                    return Err(DynamicsError::Unsupported("metric must be diagonal".into()));
                }
            }
        }
        let g00 = constant(&field.metric[0][0], "metric")?;
        let g11 = if n == 2 { constant(&field.metric[1][1], "metric")? } else { -1.0 };
        if n == 2 && g00 * g11 >= 0.0 {
            return Err(DynamicsError::Unsupported("metric must be hyperbolic".into()));
        }
        let density = constant(&sp.density(), "density")?;
        let h = field.system.hamiltonian.clone();
        let dh = (0..sp.dim()).map(|c| h.derivative(c)).collect();
        let potential = field.potential.clone();
        let dv = (0..sp.k()).map(|i| potential.derivative(sp.y(i))).collect();
        let p_coord = (0..n).map(|a| (0..sp.k()).map(|i| single_coordinate(&sp.p_weyl(a, i))).collect()).collect();
        Ok(WeylIntegrator { field, g00, g11, density, h, dh, dv, potential, p_coord, eps: sp.eps() })
    }

    pub fn space(&self) -> &'a PhaseSpace {
        self.field.space()
    }

    pub fn metric(&self) -> (f64, f64) {
        (self.g00, self.g11)
    }

    pub fn wave_speed(&self) -> f64 {
        (-self.g00 / self.g11).abs().sqrt()
    }

    fn k(&self) -> usize {
        self.space().k()
    }

    /// Chart point of a node from physical values.
    pub fn point(&self, x: &[f64], y: &[f64], eps: f64, p: &[Vec<f64>]) -> Vec<f64> {
        let sp = self.space();
        let mut pt = vec![0.0; sp.dim()];
        for (a, xa) in x.iter().enumerate() {
            pt[sp.x(a)] = *xa;
        }
        for (i, yi) in y.iter().enumerate() {
            pt[sp.y(i)] = *yi;
        }
        pt[self.eps.0] = eps * self.eps.1;
        for (a, row) in p.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                let (c, f) = self.p_coord[a][i];
                pt[c] = v / f;
            }
        }
        pt
    }

    fn zero_p(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.k()]; self.space().n()]
    }

    /// `-∂_x p¹ - ∂V/∂y` with the compact three-point stencil.
    fn force(&self, t: f64, grid: &Grid, y: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let (nx, k) = (grid.nx, self.k());
        let n = self.space().n();
        let lap = 1.0 / (self.g11 * grid.hx() * grid.hx());
        let zero = self.zero_p();
        let mut yj = vec![0.0; k];
        for j in 0..nx {
            for (i, v) in yj.iter_mut().enumerate() {
                *v = y[i * nx + j];
            }
            let x = if n == 2 { vec![t, grid.x(j)] } else { vec![t] };
            let pt = self.point(&x, &yj, 0.0, &zero);
            for i in 0..k {
                let mut f = -self.dv[i].eval(&pt)?;
                if n == 2 {
                    let (l, r) = (i * nx + (j + nx - 1) % nx, i * nx + (j + 1) % nx);
                    f -= (y[r] - 2.0 * y[i * nx + j] + y[l]) * lap;
                }
                out[i * nx + j] = f;
            }
        }
        Ok(())
    }

    fn check_cfl(&self, grid: &Grid) -> Result<(), DynamicsError> {
        if self.space().n() == 2 {
            let ratio = self.wave_speed() * grid.ht / grid.hx();
            if ratio > 1.0 {
                return Err(DynamicsError::Cfl { ratio });
            }
        }
        Ok(())
    }

    /// One kick-drift-kick step; returns the staggered momentum `p⁰` at `t + h/2`.
    fn step(&self, t: f64, grid: &Grid, y: &mut [f64], p0: &mut [f64], force: &mut [f64]) -> Result<Vec<f64>, EvalError> {
        let h = grid.ht;
        for (p, f) in p0.iter_mut().zip(force.iter()) {
            *p += 0.5 * h * f;
        }
        let half = p0.to_vec();
        for (yv, p) in y.iter_mut().zip(p0.iter()) {
            *yv += h * self.g00 * p;
        }
        self.force(t + h, grid, y, force)?;
        for (p, f) in p0.iter_mut().zip(force.iter()) {
            *p += 0.5 * h * f;
        }
        Ok(half)
    }

    /// Integrate from `init` and keep every level.
    pub fn integrate(&self, init: &Slice, grid: &Grid, gauge: Gauge) -> Result<FieldSolution, DynamicsError> {
        self.check_cfl(grid)?;
        let len = self.k() * grid.nx;
        if init.y.len() != len || init.p0.len() != len {
            return Err(DynamicsError::Unsupported(format!("initial slice needs {len} values per field array")));
        }
        let mut y = init.y.clone();
        let mut p0 = init.p0.clone();
        let mut force = vec![0.0; len];
        self.force(0.0, grid, &y, &mut force)?;
        let mut sol = FieldSolution { grid: *grid, k: self.k(), gauge, y: vec![y.clone()], p0: vec![p0.clone()], p1: vec![], eps: vec![] };
        for n in 0..grid.steps {
            self.step(grid.t(n), grid, &mut y, &mut p0, &mut force)?;
            sol.y.push(y.clone());
            sol.p0.push(p0.clone());
        }
        for n in 0..sol.levels() {
            let p1 = self.rebuild_p1(grid, &sol.y[n]);
            let eps = match gauge {
                Gauge::None => vec![0.0; grid.nx],
                Gauge::H0 => (0..grid.nx).map(|j| self.h_at(&sol, n, j, Some(&p1), 0.0).map(|h| -h)).collect::<Result<_, _>>()?,
            };
            sol.p1.push(p1);
            sol.eps.push(eps);
        }
        Ok(sol)
    }

    fn rebuild_p1(&self, grid: &Grid, y: &[f64]) -> Vec<f64> {
        let nx = grid.nx;
        if self.space().n() < 2 {
            return vec![0.0; y.len()];
        }
        (0..y.len())
            .map(|c| {
                let (i, j) = (c / nx, c % nx);
                (y[i * nx + (j + 1) % nx] - y[i * nx + (j + nx - 1) % nx]) / (2.0 * grid.hx() * self.g11)
            })
            .collect()
    }

    fn h_at(&self, sol: &FieldSolution, n: usize, j: usize, p1: Option<&[f64]>, eps: f64) -> Result<f64, EvalError> {
        let mut pt = self.node_point(sol, n, j);
        if let Some(p1) = p1 {
            for i in 0..self.k() {
                let (c, f) = self.p_coord[1][i];
                pt[c] = p1[i * sol.grid.nx + j] / f;
            }
        }
        pt[self.eps.0] = eps * self.eps.1;
        self.h.eval(&pt)
    }

    /// Chart point of node `(n, j)`.
    pub fn node_point(&self, sol: &FieldSolution, n: usize, j: usize) -> Vec<f64> {
        let (nx, k) = (sol.grid.nx, self.k());
        let sp = self.space();
        let j = j % nx;
        let y: Vec<f64> = (0..k).map(|i| sol.y[n][i * nx + j]).collect();
        let mut p = vec![(0..k).map(|i| sol.p0[n][i * nx + j]).collect::<Vec<_>>()];
        let x = if sp.n() == 2 {
            p.push((0..k).map(|i| sol.p1.get(n).map_or(0.0, |p1| p1[i * nx + j])).collect());
            vec![sol.grid.t(n), sol.grid.x(j)]
        } else {
            vec![sol.grid.t(n)]
        };
        let eps = sol.eps.get(n).map_or(0.0, |e| e[j]);
        self.point(&x, &y, eps, &p)
    }

    /// Graph tangents `X_α = ∂_α + Σ_c ∂_α q^c ∂_c` by centered differences; `0 < n < steps`.
    pub fn tangents(&self, sol: &FieldSolution, n: usize, j: usize) -> [Vec<f64>; 2] {
        let sp = self.space();
        let mut xt: Vec<f64> = self
            .node_point(sol, n + 1, j)
            .iter()
            .zip(self.node_point(sol, n - 1, j))
            .map(|(a, b)| (a - b) / (2.0 * sol.grid.ht))
            .collect();
        xt[sp.x(0)] = 1.0;
        if sp.n() < 2 {
            return [xt, vec![0.0; sp.dim()]];
        }
        xt[sp.x(1)] = 0.0;
        [xt, self.slice_tangent(sol, n, j)]
    }

    /// `X₁` along the slice; valid at every level.
    pub fn slice_tangent(&self, sol: &FieldSolution, n: usize, j: usize) -> Vec<f64> {
        let sp = self.space();
        let nx = sol.grid.nx;
        let mut xs: Vec<f64> = self
            .node_point(sol, n, (j + 1) % nx)
            .iter()
            .zip(self.node_point(sol, n, (j + nx - 1) % nx))
            .map(|(a, b)| (a - b) / (2.0 * sol.grid.hx()))
            .collect();
        xs[sp.x(0)] = 0.0;
        xs[sp.x(1)] = 1.0;
        xs
    }

    /// Velocities `v^i_α = ∂H/∂p^α_i` at a chart point, row-major `k × n`.
    pub fn velocities(&self, pt: &[f64]) -> Result<Vec<f64>, EvalError> {
        let (n, k) = (self.space().n(), self.k());
        let mut v = vec![0.0; n * k];
        for i in 0..k {
            for a in 0..n {
                let (c, f) = self.p_coord[a][i];
                v[i * n + a] = self.dh[c].eval(pt)? / f;
            }
        }
        Ok(v)
    }

    pub fn hamilton_residual(&self, sol: &FieldSolution) -> Result<HamiltonResidual, DynamicsError> {
        let sp = self.space();
        let (n, k, nx) = (sp.n(), self.k(), sol.grid.nx);
        let mut out = HamiltonResidual { first: 0.0, second: 0.0, jacobian: 0.0 };
        let sets: Vec<_> = sp.canonical_sets().cloned().collect();
        for lvl in 1..sol.levels().saturating_sub(1) {
            for j in 0..nx {
                let pt = self.node_point(sol, lvl, j);
                let [xt, xs] = self.tangents(sol, lvl, j);
                let tangents = if n == 2 { vec![xt, xs] } else { vec![xt] };
                let vh = self.velocities(&pt)?;
                let mut vd = vec![0.0; n * k];
                for i in 0..k {
                    for a in 0..n {
                        vd[i * n + a] = tangents[a][sp.y(i)];
                        out.first = out.first.max((vd[i * n + a] - vh[i * n + a]).abs());
                    }
                    let mut div = 0.0;
                    for a in 0..n {
                        let (c, f) = self.p_coord[a][i];
                        div += tangents[a][c] * f;
                    }
                    out.second = out.second.max((div + self.dh[sp.y(i)].eval(&pt)?).abs());
                }
                let z = z_matrix(n, k, &vd);
                for set in &sets {
                    let dh: f64 = sp.canonical_weights(set).iter().map(|&(c, s)| s * self.dh[c].eval(&pt).unwrap_or(f64::NAN)).sum();
                    out.jacobian = out.jacobian.max((minor(&z, set) - dh).abs());
                }
            }
        }
        Ok(out)
    }

    pub fn stress_divergence(&self, sol: &FieldSolution) -> Result<StressResidual, DynamicsError> {
        let sp = self.space();
        if sp.n() != 2 {
            return Err(DynamicsError::Unsupported("stress divergence needs n = 2".into()));
        }
        let (k, nx) = (self.k(), sol.grid.nx);
        let lag = &self.field.system.lagrangian;
        let levels = sol.levels();
        if levels < 5 {
            return Err(DynamicsError::Region("need at least five levels".into()));
        }
        // S, H^α_β, ∂L/∂x and ∂H/∂x at every node of levels 1..levels-1
        let mut s = vec![vec![nalgebra::DMatrix::zeros(2, 2); nx]; levels];
        let mut ht = s.clone();
        let mut dl = vec![vec![[0.0; 2]; nx]; levels];
        let mut dhx = dl.clone();
        let mut out = StressResidual { divergence: [0.0; 2], residual: [0.0; 2], tensor_residual: [0.0; 2], tensor_match: 0.0 };
        for lvl in 1..levels - 1 {
            for j in 0..nx {
                let pt = self.node_point(sol, lvl, j);
                let [xt, xs] = self.tangents(sol, lvl, j);
                let q: Vec<f64> = pt[..sp.q_dim()].to_vec();
                let v: Vec<f64> = (0..k).flat_map(|i| [xt[sp.y(i)], xs[sp.y(i)]]).collect();
                s[lvl][j] = stress_energy(lag, &q, &v)?;
                let gq = lag.grad_q(&q, &v)?;
                dl[lvl][j] = [gq[0], gq[1]];
                let hv = self.h.eval(&pt)?;
                ht[lvl][j] = hamiltonian_tensor_at(sp, &pt, &self.velocities(&pt)?, hv);
                dhx[lvl][j] = [self.dh[sp.x(0)].eval(&pt)?, self.dh[sp.x(1)].eval(&pt)?];
                out.tensor_match = out.tensor_match.max((&ht[lvl][j] + &s[lvl][j]).abs().max());
            }
        }
        let (h2t, h2x) = (2.0 * sol.grid.ht, 2.0 * sol.grid.hx());
        for lvl in 2..levels - 2 {
            for j in 0..nx {
                let (l, r) = ((j + nx - 1) % nx, (j + 1) % nx);
                for b in 0..2 {
                    let div = (s[lvl + 1][j][(0, b)] - s[lvl - 1][j][(0, b)]) / h2t + (s[lvl][r][(1, b)] - s[lvl][l][(1, b)]) / h2x;
                    out.divergence[b] = out.divergence[b].max(div.abs());
                    out.residual[b] = out.residual[b].max((div - dl[lvl][j][b]).abs());
                    let hdiv = (ht[lvl + 1][j][(0, b)] - ht[lvl - 1][j][(0, b)]) / h2t + (ht[lvl][r][(1, b)] - ht[lvl][l][(1, b)]) / h2x;
                    out.tensor_residual[b] = out.tensor_residual[b].max((hdiv - dhx[lvl][j][b]).abs());
                }
            }
        }
        Ok(out)
    }

    /// `max |(da - {Hω, a})(X₀, X₁)|` over interior nodes, for an `(n-1)`-form `a`.
    pub fn graph_residual(&self, sol: &FieldSolution, a: &Form) -> Result<f64, DynamicsError> {
        let alg = Algebra::new(self.space());
        let diff = a.d()?.minus(&alg.h_omega_bracket(&self.h, a)?);
        let mut worst: f64 = 0.0;
        for lvl in 1..sol.levels() - 1 {
            for j in 0..sol.grid.nx {
                let pt = self.node_point(sol, lvl, j);
                let t = self.tangents(sol, lvl, j);
                worst = worst.max(diff.eval(&pt)?.fill(&t).scalar().abs());
            }
        }
        Ok(worst)
    }

    fn check_region(&self, sol: &FieldSolution, r: &Region) -> Result<(), DynamicsError> {
        if r.t0 == 0 || r.t1 + 1 >= sol.levels() || r.t0 > r.t1 || r.x0 > r.x1 || r.x1 > r.x0 + sol.grid.nx {
            return Err(DynamicsError::Region(format!("{r:?} outside the interior of the grid")));
        }
        Ok(())
    }

    /// `(∫_D {Hω, a}, ∫_{∂D} a)` on the graph, trapezoidal quadrature, `D` oriented by `dx⁰ ∧ dx¹`.
    pub fn stokes_check(&self, sol: &FieldSolution, a: &Form, region: &Region) -> Result<(f64, f64), DynamicsError> {
        self.check_region(sol, region)?;
        if region.t0 == region.t1 || region.x0 == region.x1 {
            return Ok((0.0, 0.0));
        }
        let alg = Algebra::new(self.space());
        let b = alg.h_omega_bracket(&self.h, a)?;
        let (ht, hx) = (sol.grid.ht, sol.grid.hx());
        let w = |i: usize, lo: usize, hi: usize| if i == lo || i == hi { 0.5 } else { 1.0 };
        let mut inner = 0.0;
        for lvl in region.t0..=region.t1 {
            for j in region.x0..=region.x1 {
                let pt = self.node_point(sol, lvl, j);
                let t = self.tangents(sol, lvl, j);
                inner += w(lvl, region.t0, region.t1) * w(j, region.x0, region.x1) * b.eval(&pt)?.fill(&t).scalar();
            }
        }
        inner *= ht * hx;
        let along = |lvl: usize, j: usize, axis: usize| -> Result<f64, DynamicsError> {
            let pt = self.node_point(sol, lvl, j);
            let t = self.tangents(sol, lvl, j);
            Ok(a.eval(&pt)?.fill(&t[axis..=axis]).scalar())
        };
        let mut edge = 0.0;
        for lvl in region.t0..=region.t1 {
            let wt = w(lvl, region.t0, region.t1) * ht;
            edge += wt * (along(lvl, region.x0, 0)? - along(lvl, region.x1, 0)?);
        }
        for j in region.x0..=region.x1 {
            let wx = w(j, region.x0, region.x1) * hx;
            edge += wx * (along(region.t1, j, 1)? - along(region.t0, j, 1)?);
        }
        Ok((inner, edge))
    }

    /// `(∫ {Hω, a}, a(end) - a(start))` for a 0-form along the time segment `[t0, t1]` at node `j`.
    pub fn line_check(&self, sol: &FieldSolution, a: &Form, j: usize, t0: usize, t1: usize) -> Result<(f64, f64), DynamicsError> {
        self.check_region(sol, &Region { t0, t1, x0: j, x1: j })?;
        let alg = Algebra::new(self.space());
        let b = alg.h_omega_bracket(&self.h, a)?;
        let mut integral = 0.0;
        for lvl in t0..=t1 {
            let w = if lvl == t0 || lvl == t1 { 0.5 } else { 1.0 };
            let pt = self.node_point(sol, lvl, j);
            let t = self.tangents(sol, lvl, j);
            integral += w * sol.grid.ht * b.eval(&pt)?.fill(&t[..1]).scalar();
        }
        let at = |lvl| -> Result<f64, DynamicsError> { Ok(a.eval(&self.node_point(sol, lvl, j))?.scalar()) };
        Ok((integral, at(t1)? - at(t0)?))
    }

    fn slice_integral(&self, sol: &FieldSolution, lvl: usize, form: &Form) -> Result<f64, DynamicsError> {
        let mut acc = 0.0;
        for j in 0..sol.grid.nx {
            let pt = self.node_point(sol, lvl, j);
            acc += form.eval(&pt)?.fill(&[self.slice_tangent(sol, lvl, j)]).scalar();
        }
        Ok(acc * sol.grid.hx())
    }

    /// Slice integrals of the canonical brackets for field `i` at level `lvl` (`0 < lvl < steps`).
    pub fn slice_brackets(&self, sol: &FieldSolution, lvl: usize, i: usize, f: &[Expr], g: &Expr) -> Result<SliceBrackets, DynamicsError> {
        let sp = self.space();
        if lvl == 0 || lvl + 1 >= sol.levels() {
            return Err(DynamicsError::Region(format!("slice {lvl} has no neighbours")));
        }
        let alg = Algebra::new(sp);
        let qf = observables::position(sp, i, f);
        let pg = observables::momentum(sp, sp.y(i), g);
        let q = alg.xi(&qf)?;
        let p = alg.xi(&pg)?;
        let f2: Vec<Expr> = f.iter().map(|e| e.scale(0.5).add(&Expr::one())).collect();
        let q2 = alg.xi(&observables::position(sp, i, &f2))?;
        let p2 = alg.xi(&observables::momentum(sp, sp.y(i), &g.add(&Expr::one())))?;
        let eta = observables::eta0(sp, &self.h);
        let t = sp.x(0);
        let target = Form::scalar(sp.chart(), f[0].mul(g)).wedge(&sp.volume_alpha(0))?;
        let phi_ft = observables::position(sp, i, &f.iter().map(|e| e.derivative(t)).collect::<Vec<_>>());
        let pi_gt = observables::momentum(sp, sp.y(i), &g.derivative(t));
        let eta_q = alg.external_left(&q, &eta)?.neg();
        let eta_p = alg.external_left(&p, &eta)?.neg();
        let at = |form: &Form, l: usize| self.slice_integral(sol, l, form);
        let h2 = 2.0 * sol.grid.ht;
        Ok(SliceBrackets {
            pq: at(&alg.internal(&p, &q)?, lvl)?,
            target: at(&target, lvl)?,
            qq: at(&alg.internal(&q, &q2)?, lvl)?,
            pp: at(&alg.internal(&p, &p2)?, lvl)?,
            dq_dt: (at(&qf, lvl + 1)? - at(&qf, lvl - 1)?) / h2,
            eta_q: at(&eta_q, lvl)? + at(&phi_ft, lvl)?,
            dp_dt: (at(&pg, lvl + 1)? - at(&pg, lvl - 1)?) / h2,
            eta_p: at(&eta_p, lvl)? + at(&pi_gt, lvl)?,
        })
    }

    /// `∫ H⁰₀ ω₀` on slice `lvl` with the collocated tensor `H⁰₀(q, p)`.
    pub fn slice_energy(&self, sol: &FieldSolution, lvl: usize) -> Result<f64, DynamicsError> {
        let mut acc = 0.0;
        for j in 0..sol.grid.nx {
            acc += self.hamiltonian_tensor(sol, lvl, j)?[(0, 0)];
        }
        Ok(acc * sol.grid.hx() * self.density)
    }

    pub fn hamiltonian_tensor(&self, sol: &FieldSolution, lvl: usize, j: usize) -> Result<nalgebra::DMatrix<f64>, DynamicsError> {
        let pt = self.node_point(sol, lvl, j);
        let h = self.h.eval(&pt)?;
        Ok(hamiltonian_tensor_at(self.space(), &pt, &self.velocities(&pt)?, h))
    }

    /// `∫ H⁰₀ ω₀` on the staggered slice between `y`, `y'` with momenta `p⁰` at the half step:
    /// `½g₀₀(p⁰)² - ½g₁₁ p¹ p¹' + V(y) + ½ V'(y)(y' - y)`, with `p¹ = D₊y / g₁₁`.
    /// The leapfrog scheme conserves this exactly when `V` is quadratic.
    fn staggered_energy(&self, grid: &Grid, t: f64, y: &[f64], y_next: &[f64], p_half: &[f64]) -> Result<f64, EvalError> {
        let (nx, k) = (grid.nx, self.k());
        let zero = self.zero_p();
        let mut acc = 0.0;
        let mut yj = vec![0.0; k];
        for j in 0..nx {
            let r = (j + 1) % nx;
            for (i, v) in yj.iter_mut().enumerate() {
                *v = y[i * nx + j];
            }
            let pt = self.point(&[t, grid.x(j)], &yj, 0.0, &zero);
            acc += self.potential.eval(&pt)?;
            for i in 0..k {
                let c = i * nx + j;
                let (d0, d1) = ((y[i * nx + r] - y[c]) / grid.hx(), (y_next[i * nx + r] - y_next[c]) / grid.hx());
                acc += 0.5 * self.g00 * p_half[c] * p_half[c];
                acc -= 0.5 * d0 * d1 / self.g11;
                acc += 0.5 * self.dv[i].eval(&pt)? * (y_next[c] - y[c]);
            }
        }
        Ok(acc * grid.hx() * self.density)
    }

    /// Staggered slice energies every `every` steps without storing the solution.
    pub fn energy_history(&self, init: &Slice, grid: &Grid, every: usize) -> Result<Vec<(f64, f64)>, DynamicsError> {
        self.check_cfl(grid)?;
        if self.space().n() != 2 {
            return Err(DynamicsError::Unsupported("energy history needs n = 2".into()));
        }
        let mut y = init.y.clone();
        let mut p0 = init.p0.clone();
        let mut force = vec![0.0; y.len()];
        self.force(0.0, grid, &y, &mut force)?;
        let mut out = Vec::new();
        for n in 0..grid.steps {
            let before = y.clone();
            let half = self.step(grid.t(n), grid, &mut y, &mut p0, &mut force)?;
            if n % every.max(1) == 0 || n + 1 == grid.steps {
                out.push((grid.t(n) + 0.5 * grid.ht, self.staggered_energy(grid, grid.t(n), &before, &y, &half)?));
            }
        }
        Ok(out)
    }

    /// `L²` error of field `i` at level `lvl` against an exact solution.
    pub fn l2_error(&self, sol: &FieldSolution, lvl: usize, i: usize, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let nx = sol.grid.nx;
        let t = sol.grid.t(lvl);
        let sum: f64 = (0..nx).map(|j| (sol.y[lvl][i * nx + j] - exact(t, sol.grid.x(j))).powi(2)).sum();
        (sum * sol.grid.hx()).sqrt()
    }

    /// Solution table: `t, x, y…, p…, [ε], H, S00, res_first, res_second`.
    pub fn write_csv<W: Write>(&self, sol: &FieldSolution, out: W) -> Result<(), DynamicsError> {
        let sp = self.space();
        let (n, k, nx) = (sp.n(), self.k(), sol.grid.nx);
        let names = sp.chart().names();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = vec!["t".into(), "x".into()];
        header.extend((0..k).map(|i| names[sp.y(i)].clone()));
        for a in 0..n {
            header.extend((0..k).map(|i| names[self.p_coord[a][i].0].clone()));
        }
        if sol.gauge == Gauge::H0 {
            header.push(names[self.eps.0].clone());
        }
        header.extend(["H", "S00", "res_first", "res_second"].map(String::from));
        w.write_record(&header)?;
        for lvl in 0..sol.levels() {
            for j in 0..nx {
                let pt = self.node_point(sol, lvl, j);
                let mut row = vec![fmt(sol.grid.t(lvl)), fmt(sol.grid.x(j))];
                row.extend((0..k).map(|i| fmt(sol.y[lvl][i * nx + j])));
                row.extend((0..k).map(|i| fmt(sol.p0[lvl][i * nx + j])));
                if n == 2 {
                    row.extend((0..k).map(|i| fmt(sol.p1[lvl][i * nx + j])));
                }
                if sol.gauge == Gauge::H0 {
                    row.push(fmt(sol.eps[lvl][j]));
                }
                row.push(fmt(self.h.eval(&pt)?));
                row.push(fmt(-self.hamiltonian_tensor(sol, lvl, j)?[(0, 0)]));
                if lvl == 0 || lvl + 1 == sol.levels() {
                    row.extend([String::new(), String::new()]);
                } else {
                    let t = self.tangents(sol, lvl, j);
                    let v = self.velocities(&pt)?;
                    let mut first: f64 = 0.0;
                    let mut second: f64 = 0.0;
                    for i in 0..k {
                        let mut div = 0.0;
                        for a in 0..n {
                            first = first.max((t[a][sp.y(i)] - v[i * n + a]).abs());
                            let (c, f) = self.p_coord[a][i];
                            div += t[a][c] * f;
                        }
                        second = second.max((div + self.dh[sp.y(i)].eval(&pt)?).abs());
                    }
                    row.extend([fmt(first), fmt(second)]);
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Trajectory of a mechanical (`n = 1`) system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// `H - ε` along the run.
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn relative_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE)
    }
}

/// Störmer–Verlet for `n = 1`, where the Weyl equations reduce to Hamilton's equations.
pub fn integrate_mechanics(field: &ScalarField, y0: &[f64], p0: &[f64], h: f64, steps: usize) -> Result<Trajectory, DynamicsError> {
    let w = WeylIntegrator::new(field)?;
    if w.space().n() != 1 {
        return Err(DynamicsError::Unsupported("mechanics needs n = 1".into()));
    }
    let grid = Grid::new(1, 1.0, h, steps);
    let init = Slice { y: y0.to_vec(), p0: p0.to_vec() };
    let sol = w.integrate(&init, &grid, Gauge::None)?;
    let mut traj = Trajectory { t: vec![], y: vec![], p: vec![], energy: vec![] };
    for lvl in 0..sol.levels() {
        traj.t.push(grid.t(lvl));
        traj.y.push(sol.y[lvl].clone());
        traj.p.push(sol.p0[lvl].clone());
        traj.energy.push(w.h.eval(&w.node_point(&sol, lvl, 0))?);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests;

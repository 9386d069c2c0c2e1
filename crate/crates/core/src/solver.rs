//! Finite-volume discretization of the harmonic-map system in `(U, v)` and
//! its solution by damped Newton on the discrete energy.
//!
//! The discrete energy is a sum over grid edges ("faces"):
//!
//! ```text
//! E_h = Σ wU (U_b − U_a)² + cv e^{2(U_a + U_b)} (v_b − v_a)²
//! ```
//!
//! `wU` integrates `ρ` over the dual strip of the edge, `cv` integrates
//! `ρ⁻³`. On `ρ` edges `cv` uses the exact `v ∝ ρ⁴` profile of the
//! one-dimensional problem, so the coefficient stays finite at the axis.
//! Stationary points of `E_h` are the discrete solutions, so the Newton
//! step is a descent direction whenever the Hessian is positive definite
//! and the energy is a natural line-search merit.

use crate::energy::fit_tangent;
use crate::error::{Error, Result};
use crate::field::{max_abs, MapField};
use crate::grid::{Grid, GridSpec};
use crate::kerr::TangentMap;
use crate::model::BlendedMap;
use crate::puncture::PunctureConfig;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Both `U` and `v` unknown.
    Interior,
    /// On a rod: `U` unknown, `v` fixed to the rod value.
    Axis { rod: usize },
    /// Inside the excision disk of a puncture: tangent-map data.
    Excised { puncture: usize },
    /// Outer boundary: model-map data.
    Outer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NodeCounts {
    pub interior: usize,
    pub axis: usize,
    pub excised: usize,
    pub outer: usize,
}

#[derive(Clone, Copy, Debug)]
struct Face {
    a: usize,
    b: usize,
    wu: f64,
    cv: f64,
}

const NONE: usize = usize::MAX;

/// Sparsity pattern of the Newton matrix, shared by all iterations.
#[derive(Debug)]
struct Pattern {
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    llt: SymbolicLlt<usize>,
}

/// Grid, node classes and stencil weights for one puncture configuration.
#[derive(Debug)]
pub struct Discretization {
    config: PunctureConfig,
    spec: GridSpec,
    grid: Grid,
    kind: Vec<NodeKind>,
    faces: Vec<Face>,
    // ∫ρ and ∫ρ⁻³ over each dual cell
    w_u: Vec<f64>,
    k_v: Vec<f64>,
    model: BlendedMap,
    outer_u: Vec<f64>,
    outer_v: Vec<f64>,
    // unknown numbers of U and v at each node, NONE if fixed
    iu: Vec<usize>,
    iv: Vec<usize>,
    n_free: usize,
    pattern: OnceLock<std::result::Result<Pattern, String>>,
}

impl Clone for Discretization {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            spec: self.spec.clone(),
            grid: self.grid.clone(),
            kind: self.kind.clone(),
            faces: self.faces.clone(),
            w_u: self.w_u.clone(),
            k_v: self.k_v.clone(),
            model: self.model.clone(),
            outer_u: self.outer_u.clone(),
            outer_v: self.outer_v.clone(),
            iu: self.iu.clone(),
            iv: self.iv.clone(),
            n_free: self.n_free,
            pattern: OnceLock::new(),
        }
    }
}

/// Build the discrete problem for a configuration on a grid.
pub fn discretize(config: &PunctureConfig, spec: &GridSpec) -> Result<Discretization> {
    Discretization::new(config, spec, None)
}

impl Discretization {
    /// As [`discretize`], optionally pinning the `z` segment counts so that
    /// nodes move continuously with the punctures.
    pub fn new(config: &PunctureConfig, spec: &GridSpec, z_counts: Option<&[usize]>) -> Result<Self> {
        let grid = Grid::build(spec, config, z_counts)?;
        let model = BlendedMap::for_config(config)?;
        let (nr, nz) = (grid.n_rho(), grid.n_z());
        let eps = spec.excision_radius;
        let zs = config.z();

        let mut kind = Vec::with_capacity(grid.len());
        for j in 0..nz {
            for i in 0..nr {
                let (r, z) = (grid.rho[i], grid.z[j]);
                let k = if i == nr - 1 || j == 0 || j == nz - 1 {
                    NodeKind::Outer
                } else if let Some(p) = zs.iter().position(|&zp| r.hypot(z - zp) <= eps * (1.0 + 1e-12)) {
                    NodeKind::Excised { puncture: p }
                } else if i == 0 {
                    NodeKind::Axis { rod: config.rod_index(z) }
                } else {
                    NodeKind::Interior
                };
                kind.push(k);
            }
        }

        // dual cell edges
        let mut rh = vec![0.0; nr + 1];
        for i in 1..nr {
            rh[i] = 0.5 * (grid.rho[i - 1] + grid.rho[i]);
        }
        rh[nr] = grid.rho[nr - 1];
        let mut zh = vec![grid.z[0]; nz + 1];
        for j in 1..nz {
            zh[j] = 0.5 * (grid.z[j - 1] + grid.z[j]);
        }
        zh[nz] = grid.z[nz - 1];

        let excised = |k: usize| matches!(kind[k], NodeKind::Excised { .. });
        let mut faces = Vec::with_capacity(2 * grid.len());
        for j in 0..nz {
            let dz = zh[j + 1] - zh[j];
            for i in 0..nr - 1 {
                let (a, b) = (grid.index(i, j), grid.index(i + 1, j));
                if excised(a) && excised(b) {
                    continue;
                }
                let (r0, r1) = (grid.rho[i], grid.rho[i + 1]);
                let h = r1 - r0;
                faces.push(Face {
                    a,
                    b,
                    wu: dz * (r1 * r1 - r0 * r0) / (2.0 * h * h),
                    cv: 4.0 * dz / (r1.powi(4) - r0.powi(4)),
                });
            }
        }
        for j in 0..nz - 1 {
            let h = grid.z[j + 1] - grid.z[j];
            for i in 0..nr {
                let (a, b) = (grid.index(i, j), grid.index(i, j + 1));
                if excised(a) && excised(b) {
                    continue;
                }
                let cv = if i == 0 { 0.0 } else { 0.5 * (rh[i].powi(-2) - rh[i + 1].powi(-2)) / h };
                faces.push(Face { a, b, wu: (rh[i + 1].powi(2) - rh[i].powi(2)) / (2.0 * h), cv });
            }
        }

        let mut w_u = vec![0.0; grid.len()];
        let mut k_v = vec![f64::INFINITY; grid.len()];
        for j in 0..nz {
            let dz = zh[j + 1] - zh[j];
            for i in 0..nr {
                let k = grid.index(i, j);
                w_u[k] = dz * (rh[i + 1].powi(2) - rh[i].powi(2)) / 2.0;
                if i > 0 {
                    k_v[k] = dz * 0.5 * (rh[i].powi(-2) - rh[i + 1].powi(-2));
                }
            }
        }

        let mut outer_u = vec![0.0; grid.len()];
        let mut outer_v = vec![0.0; grid.len()];
        let mut iu = vec![NONE; grid.len()];
        let mut iv = vec![NONE; grid.len()];
        let mut n_free = 0;
        for k in 0..grid.len() {
            match kind[k] {
                NodeKind::Outer => {
                    let (r, z) = grid.coords(k);
                    let (u, v) = model.eval(r, z);
                    outer_u[k] = u;
                    outer_v[k] = v;
                }
                NodeKind::Interior => {
                    iu[k] = n_free;
                    iv[k] = n_free + 1;
                    n_free += 2;
                }
                NodeKind::Axis { .. } => {
                    iu[k] = n_free;
                    n_free += 1;
                }
                NodeKind::Excised { .. } => {}
            }
        }

        Ok(Self {
            config: config.clone(),
            spec: spec.clone(),
            grid,
            kind,
            faces,
            w_u,
            k_v,
            model,
            outer_u,
            outer_v,
            iu,
            iv,
            n_free,
            pattern: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &PunctureConfig {
        &self.config
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> &BlendedMap {
        &self.model
    }

    pub fn kind(&self, k: usize) -> NodeKind {
        self.kind[k]
    }

    pub fn counts(&self) -> NodeCounts {
        let mut c = NodeCounts::default();
        for k in &self.kind {
            match k {
                NodeKind::Interior => c.interior += 1,
                NodeKind::Axis { .. } => c.axis += 1,
                NodeKind::Excised { .. } => c.excised += 1,
                NodeKind::Outer => c.outer += 1,
            }
        }
        c
    }

    /// Number of scalar unknowns.
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Model map sampled at every node, with boundary data imposed.
    pub fn initial_guess(&self, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut u, mut v): (Vec<f64>, Vec<f64>) = (0..self.grid.len())
            .map(|k| {
                let (r, z) = self.grid.coords(k);
                if r == 0.0 && self.config.z().contains(&z) {
                    (0.0, 0.0)
                } else {
                    self.model.eval(r, z)
                }
            })
            .unzip();
        self.apply_boundary(&mut u, &mut v, b);
        (u, v)
    }

    /// Overwrite all fixed values: model data on the outer boundary, rod
    /// values on the axis and tangent data with parameters `b` in the
    /// excision disks.
    pub fn apply_boundary(&self, u: &mut [f64], v: &mut [f64], b: &[f64]) {
        let rods = self.config.rods();
        let p = self.config.punctures();
        for k in 0..self.grid.len() {
            match self.kind[k] {
                NodeKind::Outer => {
                    u[k] = self.outer_u[k];
                    v[k] = self.outer_v[k];
                }
                NodeKind::Axis { rod } => v[k] = rods[rod],
                NodeKind::Excised { puncture: i } => {
                    let (r, z) = self.grid.coords(k);
                    let (uk, vk) = excision_data(p[i].j, self.config.offset(i), b[i], r, z - p[i].z, self.spec.excision_radius);
                    u[k] = uk;
                    v[k] = vk;
                }
                NodeKind::Interior => {}
            }
        }
    }

    fn face_terms(&self, f: &Face, u: &[f64], v: &[f64]) -> (f64, f64, f64) {
        let du = u[f.b] - u[f.a];
        let dv = v[f.b] - v[f.a];
        let p = if f.cv == 0.0 { 0.0 } else { f.cv * (2.0 * (u[f.a] + u[f.b])).exp() };
        (du, dv, p)
    }

    /// Discrete energy `E_h`; the continuum energy over the grid is `2π E_h`.
    pub fn energy_h(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut e = 0.0;
        for f in &self.faces {
            let (du, dv, p) = self.face_terms(f, u, v);
            e += f.wu * du * du + p * dv * dv;
        }
        if e.is_nan() {
            f64::INFINITY
        } else {
            e
        }
    }

    /// Full gradient of `E_h` with respect to nodal `U` and `v`.
    fn gradient(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let mut gu = vec![0.0; n];
        let mut gv = vec![0.0; n];
        for f in &self.faces {
            let (du, dv, p) = self.face_terms(f, u, v);
            let q = p * dv * dv;
            gu[f.a] += -2.0 * f.wu * du + 2.0 * q;
            gu[f.b] += 2.0 * f.wu * du + 2.0 * q;
            gv[f.a] -= 2.0 * p * dv;
            gv[f.b] += 2.0 * p * dv;
        }
        (gu, gv)
    }

    /// Pointwise residuals: `ΔU − 2e^{4U}ρ⁻⁴|∇v|²` and
    /// `e^{2u}(Δv + 4∇u·∇v)`, zero at fixed values.
    pub fn residual(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (gu, gv) = self.gradient(u, v);
        let n = self.grid.len();
        let mut ru = vec![0.0; n];
        let mut rv = vec![0.0; n];
        for k in 0..n {
            if self.iu[k] != NONE {
                ru[k] = -gu[k] / (2.0 * self.w_u[k]);
            }
            if self.iv[k] != NONE {
                let rho = self.grid.coords(k).0;
                let e4u = (4.0 * u[k]).exp();
                rv[k] = -gv[k] / (2.0 * e4u * self.k_v[k]) * (2.0 * (u[k] - rho.ln())).exp();
            }
        }
        (ru, rv)
    }

    // Entries of the lower triangle of the Newton matrix, in a fixed order.
    // With `coupled == false` the U–v entries are zero, which leaves a
    // positive semidefinite block-diagonal matrix.
    fn hessian_entries(&self, u: &[f64], v: &[f64], coupled: bool, out: &mut Vec<(usize, usize, f64)>) {
        out.clear();
        let mut push = |r: usize, c: usize, x: f64| {
            if r != NONE && c != NONE {
                out.push((r.max(c), r.min(c), x));
            }
        };
        for f in &self.faces {
            let (_, dv, p) = self.face_terms(f, u, v);
            let q = p * dv * dv;
            let (ua, ub, va, vb) = (self.iu[f.a], self.iu[f.b], self.iv[f.a], self.iv[f.b]);
            push(ua, ua, 2.0 * f.wu + 4.0 * q);
            push(ub, ub, 2.0 * f.wu + 4.0 * q);
            push(ua, ub, -2.0 * f.wu + 4.0 * q);
            push(va, va, 2.0 * p);
            push(vb, vb, 2.0 * p);
            push(va, vb, -2.0 * p);
            let s = if coupled { 4.0 * p * dv } else { 0.0 };
            push(ua, va, -s);
            push(ua, vb, s);
            push(ub, va, -s);
            push(ub, vb, s);
        }
    }

    fn pattern(&self, u: &[f64], v: &[f64]) -> Result<&Pattern> {
        let p = self.pattern.get_or_init(|| {
            let mut e = Vec::new();
            self.hessian_entries(u, v, true, &mut e);
            let idx: Vec<Pair<usize, usize>> = e.iter().map(|&(r, c, _)| Pair { row: r, col: c }).collect();
            let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(self.n_free, self.n_free, &idx)
                .map_err(|e| format!("{e:?}"))?;
            let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower).map_err(|e| format!("{e:?}"))?;
            Ok(Pattern { symbolic, argsort, llt })
        });
        p.as_ref().map_err(|e| Error::LinearAlgebra(e.clone()))
    }

    /// Newton direction for the free unknowns, or `None` if the matrix is
    /// not positive definite.
    fn newton_direction(&self, u: &[f64], v: &[f64], g: &[f64], coupled: bool) -> Result<Option<Vec<f64>>> {
        let pat = self.pattern(u, v)?;
        let mut e = Vec::new();
        self.hessian_entries(u, v, coupled, &mut e);
        let vals: Vec<f64> = e.iter().map(|t| t.2).collect();
        let mat = SparseColMat::new_from_argsort(pat.symbolic.clone(), &pat.argsort, &vals)
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let Ok(llt) = Llt::try_new_with_symbolic(pat.llt.clone(), mat.as_ref(), Side::Lower) else {
            return Ok(None);
        };
        let rhs = Mat::from_fn(g.len(), 1, |i, _| -g[i]);
        let x = faer::linalg::solvers::Solve::solve(&llt, &rhs);
        let d: Vec<f64> = (0..g.len()).map(|i| x[(i, 0)]).collect();
        if d.iter().any(|x| !x.is_finite()) {
            return Ok(None);
        }
        Ok(Some(d))
    }

    fn free_gradient(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let (gu, gv) = self.gradient(u, v);
        let mut g = vec![0.0; self.n_free];
        for k in 0..self.grid.len() {
            if self.iu[k] != NONE {
                g[self.iu[k]] = gu[k];
            }
            if self.iv[k] != NONE {
                g[self.iv[k]] = gv[k];
            }
        }
        g
    }

    fn step(&self, u: &[f64], v: &[f64], d: &[f64], lam: f64) -> (Vec<f64>, Vec<f64>) {
        let mut un = u.to_vec();
        let mut vn = v.to_vec();
        for k in 0..self.grid.len() {
            if self.iu[k] != NONE {
                un[k] += lam * d[self.iu[k]];
            }
            if self.iv[k] != NONE {
                vn[k] += lam * d[self.iv[k]];
            }
        }
        (un, vn)
    }
}

/// Tangent-map data `(ln r + Ū, ±v̄ + offset)` at offset `(ρ, dz)` from a
/// puncture. The puncture node itself gets the data at radius `eps`.
fn excision_data(j: f64, offset: f64, b: f64, rho: f64, dz: f64, eps: f64) -> (f64, f64) {
    let tm = TangentMap { a: crate::kerr::tangent_scale(j), b };
    let r = rho.hypot(dz);
    let (r, c) = if r == 0.0 { (eps, 0.0) } else { (r, dz / r) };
    let (ub, vb) = tm.eval_cos(c);
    (r.ln() + ub, j.signum() * vb + offset)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Max-norm tolerance on both residuals.
    pub tol: f64,
    /// Newton iterations per excision-data update.
    pub max_iters: usize,
    /// Initial step length of the line search, in (0, 1].
    pub damping: f64,
    /// Stop updating tangent parameters once they move less than this.
    pub b_tol: f64,
    pub max_b_iters: usize,
    /// Radius of the fitting ring, in units of the excision radius.
    pub fit_ring: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-5, max_iters: 60, damping: 1.0, b_tol: 1e-4, max_b_iters: 30, fit_ring: 3.0 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.b_tol > 0.0) || !(self.fit_ring > 1.0) {
            return Err(Error::InvalidInput("solver tolerances must be positive and the fit ring outside the excision".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidInput("damping must lie in (0, 1]".into()));
        }
        if self.max_iters == 0 || self.max_b_iters == 0 {
            return Err(Error::InvalidInput("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Damped Newton on `E_h` with fixed excision data. Returns the number of
/// iterations and the final residual.
fn newton(disc: &Discretization, u: &mut Vec<f64>, v: &mut Vec<f64>, b: &[f64], opts: &SolverOptions) -> Result<(usize, f64)> {
    disc.apply_boundary(u, v, b);
    let mut e = disc.energy_h(u, v);
    let mut last = f64::INFINITY;
    let mut growth = 0;
    for it in 0..=opts.max_iters {
        let (ru, rv) = disc.residual(u, v);
        let res = max_abs(&ru).max(max_abs(&rv));
        if res < opts.tol {
            return Ok((it, res));
        }
        if it == opts.max_iters {
            return Err(Error::IterationCap { iters: it, residual: res });
        }
        if res > last {
            growth += 1;
            if growth >= 20 {
                return Err(Error::Divergence(format!("residual grew for 20 iterations, now {res:e}")));
            }
        } else {
            growth = 0;
        }
        last = res;

        let g = disc.free_gradient(u, v);
        let mut d = disc.newton_direction(u, v, &g, true)?;
        let slope = |d: &[f64]| g.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
        if d.as_ref().is_none_or(|d| slope(d) >= 0.0) {
            d = disc.newton_direction(u, v, &g, false)?;
        }
        let d = d.ok_or_else(|| Error::LinearAlgebra("Newton matrix is singular".into()))?;
        let gd = slope(&d);

        let mut lam = opts.damping;
        let (un, vn, en) = loop {
            let (un, vn) = disc.step(u, v, &d, lam);
            let en = disc.energy_h(&un, &vn);
            if en <= e + 1e-4 * lam * gd + 1e-13 * e.abs() || lam < 1e-4 {
                break (un, vn, en);
            }
            lam *= 0.5;
        };
        if !en.is_finite() {
            return Err(Error::Divergence("energy is not finite".into()));
        }
        let stalled = lam < 1e-4 && en >= e - 1e-14 * e.abs();
        *u = un;
        *v = vn;
        e = en;
        if stalled {
            let (ru, rv) = disc.residual(u, v);
            let res = max_abs(&ru).max(max_abs(&rv));
            if res < opts.tol {
                return Ok((it + 1, res));
            }
            return Err(Error::IterationCap { iters: it + 1, residual: res });
        }
    }
    unreachable!()
}

/// Solve from the model map with all tangent parameters starting at zero.
pub fn solve(disc: Arc<Discretization>, opts: &SolverOptions) -> Result<MapField> {
    let b = vec![0.0; disc.config().len()];
    solve_from(disc, None, &b, opts)
}

/// Solve with a warm start. `guess` must live on a grid with the same node
/// layout (for example the previous step of a flow with pinned counts);
/// `b0` seeds the tangent parameters.
///
/// The tangent parameters are iterated to self-consistency: after each
/// solve they are refitted on a ring outside the excision and re-imposed,
/// with a secant update per puncture.
pub fn solve_from(disc: Arc<Discretization>, guess: Option<&MapField>, b0: &[f64], opts: &SolverOptions) -> Result<MapField> {
    opts.validate()?;
    let n = disc.config().len();
    if b0.len() != n {
        return Err(Error::InvalidInput("one starting tangent parameter per puncture is needed".into()));
    }
    let mut b: Vec<f64> = b0.iter().map(|x| x.clamp(-0.99, 0.99)).collect();
    let (mut u, mut v) = match guess {
        Some(f) if f.grid().n_rho() == disc.grid().n_rho() && f.grid().n_z() == disc.grid().n_z() => {
            (f.big_u.clone(), f.v.clone())
        }
        Some(_) => return Err(Error::InvalidInput("warm start lives on a different grid layout".into())),
        None => disc.initial_guess(&b),
    };
    let ring = opts.fit_ring * disc.spec().excision_radius;
    let mut newton_iters = 0;
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut res;
    let mut b_iters = 0;
    loop {
        let (it, r) = newton(&disc, &mut u, &mut v, &b, opts)?;
        newton_iters += it;
        res = r;
        b_iters += 1;
        if n == 0 {
            break;
        }
        let fit: Vec<f64> = (0..n)
            .map(|i| fit_tangent(&disc, &u, i, ring).map(|t| t.b))
            .collect::<Result<_>>()?;
        let change = b.iter().zip(&fit).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        if change < opts.b_tol {
            break;
        }
        if b_iters >= opts.max_b_iters {
            return Err(Error::IterationCap { iters: b_iters, residual: change });
        }
        history.push((b.clone(), fit.clone()));
        let next: Vec<f64> = (0..n)
            .map(|i| {
                if history.len() < 2 {
                    return fit[i];
                }
                // secant on the map b -> fit(b) − b
                let (b0, f0) = (&history[history.len() - 2].0[i], &history[history.len() - 2].1[i]);
                let (b1, f1) = (b[i], fit[i]);
                let den = (f1 - b1) - (f0 - b0);
                if den.abs() > 1e-14 {
                    b1 - (f1 - b1) * (b1 - b0) / den
                } else {
                    f1
                }
            })
            .collect();
        b = next.iter().map(|x| x.clamp(-0.99, 0.99)).collect();
    }
    let mut f = MapField::new(disc, u, v, b);
    f.tol = Some(opts.tol);
    f.max_residual = res;
    f.newton_iters = newton_iters;
    f.b_iters = b_iters;
    Ok(f)
}

/// Residuals of a field at its free nodes (zero elsewhere).
pub fn residual(f: &MapField) -> (Vec<f64>, Vec<f64>) {
    f.disc().residual(&f.big_u, &f.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puncture::Puncture;

    fn spec(n_rho: usize, n_z: usize) -> GridSpec {
        GridSpec::graded(0.0, 10.0, n_rho, n_z, 0.2, 0.01)
    }

    #[test]
    fn counts_partition_the_grid() {
        let cfg = PunctureConfig::new(vec![Puncture::new(-1.0, 1.0), Puncture::new(1.0, 0.5)]).unwrap();
        let d = discretize(&cfg, &spec(64, 192)).unwrap();
        let c = d.counts();
        assert_eq!(c.interior + c.axis + c.excised + c.outer, d.grid().len());
        assert_eq!(c.outer, 2 * 64 + 192 - 2);
        assert_eq!(d.n_free(), 2 * c.interior + c.axis);
    }

    #[test]
    fn flat_map_is_exact() {
        let cfg = PunctureConfig::new(vec![]).unwrap();
        let d = Arc::new(discretize(&cfg, &GridSpec { h_min: None, ..spec(16, 32) }).unwrap());
        let f = solve(d, &SolverOptions::default()).unwrap();
        assert!(f.big_u.iter().all(|&x| x == 0.0));
        assert!(f.v.iter().all(|&x| x == 0.0));
        assert!(f.newton_iters <= 2);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let cfg = PunctureConfig::new(vec![Puncture::new(0.0, 1.0)]).unwrap();
        let d = discretize(&cfg, &spec(64, 128)).unwrap();
        let (u, v) = d.initial_guess(&[0.1]);
        let g = d.free_gradient(&u, &v);
        // directional derivative of the gradient along a smooth direction
        let dir: Vec<f64> = (0..d.n_free()).map(|i| ((i as f64) * 0.37).sin()).collect();
        let h = 1e-6;
        let (up, vp) = d.step(&u, &v, &dir, h);
        let (um, vm) = d.step(&u, &v, &dir, -h);
        let gp = d.free_gradient(&up, &vp);
        let gm = d.free_gradient(&um, &vm);
        let mut e = Vec::new();
        d.hessian_entries(&u, &v, true, &mut e);
        let mut hd = vec![0.0; d.n_free()];
        let mut seen = std::collections::HashSet::new();
        // duplicates are summed; symmetric off-diagonals act both ways
        for &(r, c, x) in &e {
            hd[r] += x * dir[c];
            if r != c {
                hd[c] += x * dir[r];
            }
            seen.insert((r, c));
        }
        let scale = hd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..d.n_free() {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            assert!((fd - hd[i]).abs() < 1e-5 * scale, "{i}: {fd} vs {}", hd[i]);
        }
        let _ = g;
    }
}

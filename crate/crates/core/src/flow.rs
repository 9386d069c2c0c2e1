//! The puncture flow `dzᵢ/dt = −bᵢ(z)`: classical RK4 with a fresh solve
//! per stage, event detection, and the check of the energy dissipation law
//! `dE/dt = −Σ f(bᵢ) bᵢ`.

use crate::energy::energy;
use crate::error::{Error, Result};
use crate::field::MapField;
use crate::grid::GridSpec;
use crate::kerr;
use crate::puncture::{Puncture, PunctureConfig};
use crate::solver::{solve_from, Discretization, SolverOptions};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowOptions {
    /// Time step; by default chosen so that `max|b|·dt ≤ 0.05·min gap`.
    pub dt: Option<f64>,
    pub t_max: f64,
    /// Defaults to four excision radii.
    pub collision_gap: Option<f64>,
    /// Defaults to half the grid's `rho_max`.
    pub scatter_gap: Option<f64>,
    /// Stop once every `|bᵢ|` is below this; zero disables the check.
    pub stagnation_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { dt: None, t_max: 10.0, collision_gap: None, scatter_gap: None, stagnation_tol: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub z: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    pub b: Vec<f64>,
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Collision,
    Scattering,
    Stagnation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub kind: EventKind,
    pub t: f64,
    /// Punctures taking part (the merged or separating ones).
    pub indices: Vec<usize>,
    pub config_before: Vec<Puncture>,
    /// One configuration per cluster after the event.
    pub config_after: Vec<Vec<Puncture>>,
    pub energy_before: f64,
    /// Summed energy of the post-event clusters, if they were solved.
    pub energy_after: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub states: Vec<FlowState>,
    pub events: Vec<FlowEvent>,
    pub dt: f64,
    /// Set when a solve failed mid-run; the states up to it are kept.
    pub error: Option<String>,
}

impl FlowTrajectory {
    /// `E(t_{k+1}) ≤ E(t_k) + tol·E(0)` for every recorded step.
    pub fn energy_monotone(&self, tol: f64) -> bool {
        let Some(e0) = self.states.first().map(|s| s.energy) else {
            return true;
        };
        self.states.windows(2).all(|w| w[1].energy <= w[0].energy + tol * e0.abs())
    }

    /// Largest step-to-step energy increase relative to `E(0)`.
    pub fn max_energy_increase(&self) -> f64 {
        let Some(e0) = self.states.first().map(|s| s.energy) else {
            return 0.0;
        };
        self.states.windows(2).map(|w| (w[1].energy - w[0].energy) / e0.abs()).fold(0.0, f64::max)
    }

    /// CSV with header `t,z_1..z_N,b_1..b_N,E`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.z.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out += &format!(",z_{i}");
        }
        for i in 1..=n {
            out += &format!(",b_{i}");
        }
        out += ",E\n";
        for s in &self.states {
            let mut row = vec![crate::field::fmt17(s.t)];
            row.extend(s.z.iter().map(|&x| crate::field::fmt17(x)));
            row.extend(s.b.iter().map(|&x| crate::field::fmt17(x)));
            row.push(crate::field::fmt17(s.energy));
            out += &row.join(",");
            out.push('\n');
        }
        out
    }
}

/// Grid and solver settings shared by every solve of a flow.
#[derive(Clone, Debug)]
pub struct FlowContext {
    pub spec: GridSpec,
    pub solver: SolverOptions,
    z_counts: Option<Vec<usize>>,
}

impl FlowContext {
    pub fn new(spec: GridSpec, solver: SolverOptions) -> Self {
        Self { spec, solver, z_counts: None }
    }

    fn solve(&mut self, config: &PunctureConfig, warm: Option<&MapField>) -> Result<MapField> {
        let disc = Discretization::new(config, &self.spec, self.z_counts.as_deref())?;
        if self.z_counts.is_none() {
            self.z_counts = Some(disc.grid().z_counts.clone());
        }
        let b0 = warm.map_or_else(|| vec![0.0; config.len()], |f| f.b.clone());
        solve_from(Arc::new(disc), warm, &b0, &self.solver)
    }
}

/// Tangent parameters at positions `z`: the right-hand side is `−b`.
pub fn flow_rhs(base: &PunctureConfig, z: &[f64], ctx: &mut FlowContext, warm: Option<&MapField>) -> Result<(Vec<f64>, MapField)> {
    let cfg = base.moved(z)?;
    let f = ctx.solve(&cfg, warm)?;
    Ok((f.b.clone(), f))
}

fn gaps(z: &[f64]) -> Vec<f64> {
    z.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Merge runs of punctures closer than `collision_gap` into single
/// punctures at their |J|-weighted mean with summed `J`, or split the
/// configuration at gaps wider than `scatter_gap` into clusters, each
/// translated to put its |J|-weighted center at the origin.
pub fn handle_event(kind: EventKind, config: &PunctureConfig, collision_gap: f64, scatter_gap: f64) -> Result<Vec<PunctureConfig>> {
    let p = config.punctures();
    match kind {
        EventKind::Collision => {
            let mut merged = Vec::new();
            let mut run = vec![p[0]];
            let flush = |run: &mut Vec<Puncture>, out: &mut Vec<Puncture>| -> Result<()> {
                let j: f64 = run.iter().map(|q| q.j).sum();
                if j == 0.0 {
                    return Err(Error::Unsupported("colliding punctures have zero total angular momentum".into()));
                }
                let w: f64 = run.iter().map(|q| q.j.abs()).sum();
                let z = run.iter().map(|q| q.j.abs() * q.z).sum::<f64>() / w;
                out.push(Puncture::new(z, j));
                run.clear();
                Ok(())
            };
            for q in &p[1..] {
                if q.z - run.last().unwrap().z >= collision_gap {
                    flush(&mut run, &mut merged)?;
                }
                run.push(*q);
            }
            flush(&mut run, &mut merged)?;
            Ok(vec![PunctureConfig::with_gauge(merged, config.gauge())?])
        }
        EventKind::Scattering => {
            let mut clusters = Vec::new();
            let mut start = 0;
            for i in 1..=p.len() {
                if i == p.len() || p[i].z - p[i - 1].z > scatter_gap {
                    let c = PunctureConfig::with_gauge(p[start..i].to_vec(), config.gauge())?;
                    clusters.push(c.translated(-c.center())?);
                    start = i;
                }
            }
            Ok(clusters)
        }
        EventKind::Stagnation => Ok(vec![config.clone()]),
    }
}

fn detect(z: &[f64], b: &[f64], collision_gap: f64, scatter_gap: f64, stagnation_tol: f64) -> Option<(EventKind, Vec<usize>)> {
    let g = gaps(z);
    let close: Vec<usize> = g.iter().enumerate().filter(|(_, &d)| d < collision_gap).flat_map(|(i, _)| [i, i + 1]).collect();
    if !close.is_empty() {
        let mut idx = close;
        idx.dedup();
        return Some((EventKind::Collision, idx));
    }
    let far: Vec<usize> = g.iter().enumerate().filter(|(_, &d)| d > scatter_gap).flat_map(|(i, _)| [i, i + 1]).collect();
    if !far.is_empty() {
        let mut idx = far;
        idx.dedup();
        return Some((EventKind::Scattering, idx));
    }
    if stagnation_tol > 0.0 && b.iter().all(|x| x.abs() < stagnation_tol) {
        return Some((EventKind::Stagnation, (0..z.len()).collect()));
    }
    None
}

/// Steps whose stages leave the admissible geometry are halved up to this
/// many times.
const MAX_HALVINGS: usize = 8;

/// Integrate the flow from `initial` until `t_max` or the first event.
///
/// Every RK4 stage is a full solve, warm-started from the field at the
/// start of the step on a grid with the same node layout. A step is halved
/// when a stage would overlap excision disks. A failed solve ends the run
/// and is reported in `error` with the states so far.
pub fn integrate(initial: &PunctureConfig, ctx: &mut FlowContext, opts: &FlowOptions) -> Result<FlowTrajectory> {
    if initial.is_empty() {
        return Err(Error::InvalidInput("the flow needs at least one puncture".into()));
    }
    if !(opts.t_max > 0.0) {
        return Err(Error::InvalidInput("t_max must be positive".into()));
    }
    let collision_gap = opts.collision_gap.unwrap_or(4.0 * ctx.spec.excision_radius);
    let scatter_gap = opts.scatter_gap.unwrap_or(0.5 * ctx.spec.rho_max);
    let j = initial.j();

    let (b0, f0) = flow_rhs(initial, &initial.z(), ctx, None)?;
    let e0 = energy(&f0)?.e_total;
    let dt = match opts.dt {
        Some(dt) if dt > 0.0 => dt,
        Some(_) => return Err(Error::InvalidInput("dt must be positive".into())),
        None => default_dt(initial, &b0, opts.t_max),
    };
    let mut traj = FlowTrajectory { dt, ..Default::default() };
    let mut t = 0.0;
    let mut z = initial.z();
    let (mut b, mut field, mut e) = (b0, f0, e0);
    loop {
        traj.states.push(FlowState { t, z: z.clone(), j: j.clone(), b: b.clone(), energy: e });
        if let Some((kind, indices)) = detect(&z, &b, collision_gap, scatter_gap, opts.stagnation_tol) {
            let before = initial.moved(&z)?;
            let after = handle_event(kind, &before, collision_gap, scatter_gap)?;
            let energy_after = match kind {
                EventKind::Stagnation => Some(e),
                _ => {
                    let mut total = 0.0;
                    for c in &after {
                        let mut sub = FlowContext::new(recentered_spec(&ctx.spec, c), ctx.solver.clone());
                        let f = sub.solve(c, None)?;
                        total += energy(&f)?.e_total;
                    }
                    Some(total)
                }
            };
            traj.events.push(FlowEvent {
                kind,
                t,
                indices,
                config_before: before.punctures().to_vec(),
                config_after: after.iter().map(|c| c.punctures().to_vec()).collect(),
                energy_before: e,
                energy_after,
            });
            break;
        }
        if t >= opts.t_max * (1.0 - 1e-12) {
            break;
        }
        let mut h = dt.min(opts.t_max - t);
        let mut step = None;
        for _ in 0..=MAX_HALVINGS {
            let attempt = rk4_step(initial, &z, &b, &field, h, ctx).and_then(|zn| {
                let (bn, fnew) = flow_rhs(initial, &zn, ctx, Some(&field))?;
                let en = energy(&fnew)?.e_total;
                Ok((zn, bn, en, fnew))
            });
            match attempt {
                // a stage ran into overlapping or unresolved excision disks
                Err(Error::Geometry(_)) | Err(Error::InvalidInput(_)) => h *= 0.5,
                other => {
                    step = Some(other);
                    break;
                }
            }
        }
        match step {
            Some(Ok((zn, bn, en, fnew))) => {
                z = zn;
                b = bn;
                e = en;
                field = fnew;
                t += h;
            }
            Some(Err(err)) => {
                traj.error = Some(err.to_string());
                break;
            }
            None => {
                traj.error = Some(format!("step size fell below {h:e} without a valid configuration"));
                break;
            }
        }
    }
    Ok(traj)
}

// Grid for a post-event cluster: same shape, centered on the cluster.
fn recentered_spec(spec: &GridSpec, c: &PunctureConfig) -> GridSpec {
    let mid = 0.5 * (spec.z_min + spec.z_max);
    spec.translated(c.center() - mid)
}

fn rk4_step(base: &PunctureConfig, z: &[f64], b: &[f64], warm: &MapField, h: f64, ctx: &mut FlowContext) -> Result<Vec<f64>> {
    let k1: Vec<f64> = b.iter().map(|x| -x).collect();
    rk4(z, &k1, h, |y| Ok(flow_rhs(base, y, ctx, Some(warm))?.0.iter().map(|x| -x).collect()))
}

/// One classical RK4 step of `y' = f(y)` from `y` with `k1 = f(y)` given.
pub fn rk4(y: &[f64], k1: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let k2 = f(&axpy(0.5 * h, k1))?;
    let k3 = f(&axpy(0.5 * h, &k2))?;
    let k4 = f(&axpy(h, &k3))?;
    Ok((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Flow each post-event configuration on its own from the event time to
/// `opts.t_max`, on a copy of the grid centered on the cluster.
pub fn restart_after(event: &FlowEvent, ctx: &FlowContext, opts: &FlowOptions) -> Result<Vec<FlowTrajectory>> {
    if event.kind == EventKind::Stagnation {
        return Ok(Vec::new());
    }
    let rest = FlowOptions { t_max: opts.t_max - event.t, ..opts.clone() };
    if !(rest.t_max > 0.0) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for p in &event.config_after {
        let c = PunctureConfig::with_gauge(p.clone(), 0.0)?;
        let mut sub = FlowContext::new(recentered_spec(&ctx.spec, &c), ctx.solver.clone());
        let mut traj = integrate(&c, &mut sub, &rest)?;
        for s in &mut traj.states {
            s.t += event.t;
        }
        for e in &mut traj.events {
            e.t += event.t;
        }
        out.push(traj);
    }
    Ok(out)
}

/// Step with `max|b|·dt = 0.05·min gap`, at most `t_max/4`.
pub fn default_dt(config: &PunctureConfig, b: &[f64], t_max: f64) -> f64 {
    let bmax = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if config.len() < 2 || bmax == 0.0 {
        return 0.25 * t_max;
    }
    (0.05 * config.min_gap() / bmax).min(0.25 * t_max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationRow {
    pub t: f64,
    /// Centered difference of the recorded energies.
    pub de_dt: f64,
    /// `−Σ f(bᵢ) bᵢ`.
    pub predicted: f64,
    pub max_abs_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationReport {
    pub rows: Vec<DissipationRow>,
    /// Largest `|de_dt − predicted| / |predicted|` over rows with
    /// `max|b| > b_min`; `None` if there are no such rows.
    pub max_relative_misfit: Option<f64>,
    /// Largest `|de_dt − predicted|` over all rows.
    pub max_abs_misfit: f64,
    /// `predicted ≤ 0` at every recorded state.
    pub sign_law: bool,
}

/// Compare centered `dE/dt` with `−Σ f(bᵢ) bᵢ` at the interior states.
pub fn dissipation_check(traj: &FlowTrajectory, b_min: f64) -> Result<DissipationReport> {
    let s = &traj.states;
    if s.len() < 3 {
        return Err(Error::InvalidInput(format!("dissipation check needs at least 3 states, got {}", s.len())));
    }
    let rate = |b: &[f64]| -> Result<f64> {
        let mut r = 0.0;
        for &x in b {
            r -= kerr::f(x)? * x;
        }
        Ok(r)
    };
    let mut sign_law = true;
    for st in s {
        if rate(&st.b)? > 0.0 {
            sign_law = false;
        }
    }
    let mut rows = Vec::new();
    let mut rel: Option<f64> = None;
    let mut abs_mis = 0.0f64;
    for k in 1..s.len() - 1 {
        let de_dt = (s[k + 1].energy - s[k - 1].energy) / (s[k + 1].t - s[k - 1].t);
        let predicted = rate(&s[k].b)?;
        let max_abs_b = s[k].b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        abs_mis = abs_mis.max((de_dt - predicted).abs());
        if max_abs_b > b_min {
            let m = (de_dt - predicted).abs() / predicted.abs();
            rel = Some(rel.map_or(m, |r| r.max(m)));
        }
        rows.push(DissipationRow { t: s[k].t, de_dt, predicted, max_abs_b });
    }
    Ok(DissipationReport { rows, max_relative_misfit: rel, max_abs_misfit: abs_mis, sign_law })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: &[(f64, f64)]) -> PunctureConfig {
        PunctureConfig::new(p.iter().map(|&(z, j)| Puncture::new(z, j)).collect()).unwrap()
    }

    #[test]
    fn merge_sums_angular_momenta() {
        let c = cfg(&[(-0.05, 1.0), (0.05, 1.0), (3.0, 0.5)]);
        let out = handle_event(EventKind::Collision, &c, 0.2, 100.0).unwrap();
        assert_eq!(out.len(), 1);
        let p = out[0].punctures();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].j, 2.0);
        assert!(p[0].z.abs() < 1e-15);
        assert_eq!(out[0].total_j(), c.total_j());
    }

    #[test]
    fn merge_with_zero_total_is_unsupported() {
        let c = cfg(&[(-0.05, 1.0), (0.05, -1.0)]);
        assert!(matches!(handle_event(EventKind::Collision, &c, 0.2, 100.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn scattering_splits_into_recentered_clusters() {
        let c = cfg(&[(-30.0, 1.0), (-29.0, 1.0), (25.0, 2.0)]);
        let out = handle_event(EventKind::Scattering, &c, 0.1, 20.0).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].z(), vec![-0.5, 0.5]);
        assert_eq!(out[1].z(), vec![0.0]);
    }

    #[test]
    fn detection_order() {
        assert_eq!(detect(&[0.0, 0.1], &[0.5, -0.5], 0.2, 10.0, 0.01).unwrap().0, EventKind::Collision);
        assert_eq!(detect(&[0.0, 11.0], &[0.5, -0.5], 0.2, 10.0, 0.01).unwrap().0, EventKind::Scattering);
        assert_eq!(detect(&[0.0, 1.0], &[0.001, -0.001], 0.2, 10.0, 0.01).unwrap().0, EventKind::Stagnation);
        assert!(detect(&[0.0, 1.0], &[0.1, -0.1], 0.2, 10.0, 0.01).is_none());
        assert!(detect(&[0.0], &[0.0], 0.2, 10.0, 0.0).is_none());
    }

    #[test]
    fn rk4_is_fourth_order() {
        // y' = −y², y(0) = 1: y(t) = 1/(1+t)
        let run = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = vec![1.0];
            for _ in 0..n {
                let k1 = vec![-y[0] * y[0]];
                y = rk4(&y, &k1, h, |y| Ok(vec![-y[0] * y[0]])).unwrap();
            }
            (y[0] - 0.5f64).abs()
        };
        let (e1, e2) = (run(8), run(16));
        assert!(((e1 / e2).log2() - 4.0).abs() < 0.2);
    }

    #[test]
    fn restart_flows_each_cluster() {
        let ev = FlowEvent {
            kind: EventKind::Collision,
            t: 0.5,
            indices: vec![0, 1],
            config_before: vec![Puncture::new(-0.05, 1.0), Puncture::new(0.05, 1.0)],
            config_after: vec![vec![Puncture::new(0.0, 2.0)]],
            energy_before: 0.0,
            energy_after: None,
        };
        let ctx = FlowContext::new(GridSpec::graded(0.0, 10.0, 64, 128, 0.1, 0.01), SolverOptions::default());
        let out = restart_after(&ev, &ctx, &FlowOptions { t_max: 1.0, ..Default::default() }).unwrap();
        assert_eq!(out.len(), 1);
        // a single puncture stagnates at once
        assert_eq!(out[0].states[0].t, 0.5);
        assert_eq!(out[0].events[0].kind, EventKind::Stagnation);
    }

    #[test]
    fn dissipation_needs_three_states() {
        let t = FlowTrajectory::default();
        assert!(dissipation_check(&t, 0.05).is_err());
    }
}

//! Post-processing of solved fields: renormalized energy, tangent
//! parameters (by fitting and from the rod angle defects), the mass bound
//! and the response of a solution to moving one puncture.

use crate::error::{invalid, Error, Result};
use crate::field::MapField;
use crate::grid::GridSpec;
use crate::interp;
use crate::kerr::{tangent_scale, TangentMap};
use crate::puncture::PunctureConfig;
use crate::quadrature::gauss_legendre;
use crate::solver::{solve_from, Discretization, SolverOptions};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// Energy of the grid part of the domain.
    pub e_grid: f64,
    /// Tangent-map energy inside each excision ball.
    pub e_excision: Vec<f64>,
    pub e_total: f64,
    /// `e_total / 8π`, the lower bound on the mass.
    pub mass_bound: f64,
}

/// Renormalized energy of a solved field.
pub fn energy(f: &MapField) -> Result<EnergyReport> {
    if !f.is_solved() {
        return Err(Error::Unsolved(f.max_residual()));
    }
    Ok(energy_unchecked(f))
}

/// Energy of any field, solved or not.
pub fn energy_unchecked(f: &MapField) -> EnergyReport {
    let e_grid = 2.0 * PI * f.disc().energy_h(&f.big_u, &f.v);
    let eps = f.spec().excision_radius;
    let e_excision: Vec<f64> = f
        .config()
        .punctures()
        .iter()
        .zip(&f.b)
        .map(|(p, &b)| 2.0 * PI * eps * TangentMap { a: tangent_scale(p.j), b }.sphere_energy())
        .collect();
    let e_total = e_grid + e_excision.iter().sum::<f64>();
    EnergyReport { e_grid, e_excision, e_total, mass_bound: e_total / (8.0 * PI) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TangentFit {
    pub b: f64,
    /// Root-mean-square misfit on the ring.
    pub residual: f64,
    /// The minimizer sits at the edge of `[-0.999, 0.999]`.
    pub at_edge: bool,
}

const RING_SAMPLES: usize = 180;

/// `U − ln rᵢ`, which stays bounded near puncture `i`.
fn log_free(disc: &Discretization, u: &[f64], i: usize) -> Vec<f64> {
    let zi = disc.config().punctures()[i].z;
    let g = disc.grid();
    (0..g.len())
        .map(|k| {
            let (r, z) = g.coords(k);
            let d = r.hypot(z - zi);
            if d == 0.0 {
                0.0
            } else {
                u[k] - d.ln()
            }
        })
        .collect()
}

fn check_ring(disc: &Discretization, i: usize, radius: f64) -> Result<()> {
    let cfg = disc.config();
    if i >= cfg.len() {
        return invalid(format!("no puncture with index {i}"));
    }
    let spec = disc.spec();
    let zi = cfg.punctures()[i].z;
    if radius <= spec.excision_radius {
        return Err(Error::Geometry("ring lies inside the excision disk".into()));
    }
    if zi - radius <= spec.z_min || zi + radius >= spec.z_max || radius >= spec.rho_max {
        return Err(Error::Geometry("ring leaves the grid".into()));
    }
    for (k, p) in cfg.punctures().iter().enumerate() {
        if k != i && (p.z - zi).abs() <= radius + spec.excision_radius {
            return Err(Error::Geometry("ring reaches another puncture".into()));
        }
    }
    Ok(())
}

/// Fit the tangent profile `Ū(θ, b)` plus a free constant to `U − ln rᵢ`
/// on the ring of the given radius around puncture `i`, by golden-section
/// search over `b`.
pub fn fit_tangent(disc: &Discretization, u: &[f64], i: usize, radius: f64) -> Result<TangentFit> {
    check_ring(disc, i, radius)?;
    let p = disc.config().punctures()[i];
    let w = log_free(disc, u, i);
    let g = disc.grid();
    let thetas: Vec<f64> = (1..RING_SAMPLES).map(|m| PI * m as f64 / RING_SAMPLES as f64).collect();
    let y: Vec<f64> = thetas
        .iter()
        .map(|&t| interp::eval(&g.rho, &g.z, &w, radius * t.sin(), p.z + radius * t.cos()).0)
        .collect();
    let a = tangent_scale(p.j);
    let misfit = |b: f64| {
        let tm = TangentMap { a, b };
        let d: Vec<f64> = thetas.iter().zip(&y).map(|(&t, &y)| y - tm.eval(t).0).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64
    };
    let (lo, hi) = (-0.999, 0.999);
    let b = golden_section(misfit, lo, hi, 1e-10);
    Ok(TangentFit { b, residual: misfit(b).sqrt(), at_edge: b <= lo + 1e-6 || b >= hi - 1e-6 })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Tangent parameter of puncture `i` fitted on the default ring
/// (three excision radii).
pub fn tangent_fit(f: &MapField, i: usize) -> Result<TangentFit> {
    fit_tangent(f.disc(), &f.big_u, i, 3.0 * f.spec().excision_radius)
}

/// Difference of the logarithmic angle defects of the rods above and below
/// puncture `i`: the integral of `dα` along the half circle of the given
/// radius, from the lower axis point to the upper one, with
///
/// ```text
/// ∂ρα = ρ (U_ρ² − U_z² + e^{4u}(v_ρ² − v_z²)),   ∂zα = 2ρ (U_ρU_z + e^{4u} v_ρ v_z)
/// ```
///
/// For a tangent map the result is `2 artanh b`.
pub fn alpha_defect(f: &MapField, i: usize, radius: f64) -> Result<f64> {
    check_ring(f.disc(), i, radius)?;
    let zi = f.config().punctures()[i].z;
    let w = log_free(f.disc(), &f.big_u, i);
    let g = f.grid();
    let integrand = |t: f64| {
        let (s, c) = t.sin_cos();
        let (rho, dz) = (radius * s, radius * c);
        let (wv, wr, wz) = interp::eval(&g.rho, &g.z, &w, rho, zi + dz);
        let (_, vr, vz) = interp::eval(&g.rho, &g.z, &f.v, rho, zi + dz);
        let r2 = radius * radius;
        let (ur, uz) = (wr + rho / r2, wz + dz / r2);
        let big_u = wv + radius.ln();
        let e4u = (4.0 * big_u).exp() / rho.powi(4);
        let a_rho = rho * (ur * ur - uz * uz + e4u * (vr * vr - vz * vz));
        let a_z = 2.0 * rho * (ur * uz + e4u * vr * vz);
        // dα/dθ along ρ = R sin θ, z = zᵢ + R cos θ
        a_rho * radius * c - a_z * radius * s
    };
    Ok(-panel_integral(integrand, 0.0, PI, 48, 16))
}

/// Composite Gauss–Legendre rule; the end panels use `θ = θ₀ ± h s²` so
/// that inverse square-root endpoint behaviour is integrated accurately.
fn panel_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (&xq, &wq) in x.iter().zip(&w) {
            let s = 0.5 * (xq + 1.0);
            let ws = 0.5 * wq;
            total += if p == 0 {
                ws * 2.0 * h * s * f(a + h * s * s)
            } else if p == panels - 1 {
                ws * 2.0 * h * s * f(b - h * s * s)
            } else {
                ws * h * f(lo + h * s)
            };
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    /// `𝐛ᵢ₊₁ − 𝐛ᵢ` across each puncture.
    pub defect_diffs: Vec<f64>,
    /// `tanh` of half the defect differences.
    pub b_alpha: Vec<f64>,
    /// Fitted tangent parameters.
    pub b: Vec<f64>,
    pub fit_residuals: Vec<f64>,
    /// `max |b − b_alpha|`.
    pub consistency: f64,
}

/// Both extractions of the tangent parameters; the defects use a ring of
/// four excision radii.
pub fn defect_report(f: &MapField) -> Result<DefectReport> {
    let n = f.config().len();
    let radius = 4.0 * f.spec().excision_radius;
    let mut rep = DefectReport {
        defect_diffs: Vec::with_capacity(n),
        b_alpha: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        fit_residuals: Vec::with_capacity(n),
        consistency: 0.0,
    };
    for i in 0..n {
        let d = alpha_defect(f, i, radius)?;
        let fit = tangent_fit(f, i)?;
        rep.defect_diffs.push(d);
        rep.b_alpha.push((0.5 * d).tanh());
        rep.b.push(fit.b);
        rep.fit_residuals.push(fit.residual);
        rep.consistency = rep.consistency.max((fit.b - (0.5 * d).tanh()).abs());
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassBound {
    /// `E / 8π`.
    pub f_value: f64,
    pub sqrt_j: f64,
    /// `f_value ≥ sqrt_j` up to 2%.
    pub satisfied: bool,
}

pub fn mass_bound_check(f: &MapField) -> Result<MassBound> {
    let e = energy(f)?;
    let sqrt_j = f.config().total_j().abs().sqrt();
    Ok(MassBound { f_value: e.mass_bound, sqrt_j, satisfied: e.mass_bound >= 0.98 * sqrt_j })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub h: f64,
    pub ring_radius: f64,
    /// Finite-difference rate of change of `bᵢ`.
    pub b_dot: f64,
    /// Relative misfit of `∂U/∂zᵢ` against the leading tangent profile.
    pub leading_misfit: f64,
    /// Relative misfit of `∂U/∂zᵢ` against `−∂z U` of the base solution.
    pub translation_misfit: f64,
}

/// Move puncture `i` by `±h`, solve both configurations on grids with the
/// same node layout, and compare the centered difference of `U` on a ring
/// of four excision radii with the leading prediction
/// `(−(z−zᵢ)/rᵢ² + ρ/rᵢ² ∂θŪ) + ḃᵢ ∂_bŪ`.
pub fn sensitivity_check(
    config: &PunctureConfig,
    spec: &GridSpec,
    i: usize,
    h: f64,
    opts: &SolverOptions,
) -> Result<SensitivityReport> {
    if i >= config.len() {
        return invalid(format!("no puncture with index {i}"));
    }
    if !(h > 0.0) {
        return invalid("step must be positive");
    }
    let base_disc = Arc::new(Discretization::new(config, spec, None)?);
    let counts = base_disc.grid().z_counts.clone();
    let base = solve_from(base_disc, None, &vec![0.0; config.len()], opts)?;
    let shifted = |s: f64| -> Result<MapField> {
        let mut z = config.z();
        z[i] += s;
        let cfg = config.moved(&z)?;
        let disc = Arc::new(Discretization::new(&cfg, spec, Some(&counts))?);
        solve_from(disc, Some(&base), &base.b, opts)
    };
    let plus = shifted(h)?;
    let minus = shifted(-h)?;

    let radius = 4.0 * spec.excision_radius;
    check_ring(base.disc(), i, radius + h)?;
    let p = config.punctures()[i];
    // U and its gradient at a physical point, via the log-free part around
    // the (moved) puncture
    let sampler = |f: &MapField| {
        let zi = f.config().punctures()[i].z;
        let w = log_free(f.disc(), &f.big_u, i);
        let g = f.grid().clone();
        move |rho: f64, z: f64| {
            let (wv, wr, wz) = interp::eval(&g.rho, &g.z, &w, rho, z);
            let r = rho.hypot(z - zi);
            (wv + r.ln(), wr + rho / (r * r), wz + (z - zi) / (r * r))
        }
    };
    let (sp, sm, sb) = (sampler(&plus), sampler(&minus), sampler(&base));
    let b_dot = (plus.b[i] - minus.b[i]) / (2.0 * h);
    let tm = TangentMap { a: tangent_scale(p.j), b: base.b[i] };
    let (mut fd2, mut lead2, mut trans2) = (0.0, 0.0, 0.0);
    for m in 1..RING_SAMPLES {
        let t = PI * m as f64 / RING_SAMPLES as f64;
        let (rho, z) = (radius * t.sin(), p.z + radius * t.cos());
        let up = sp(rho, z).0;
        let um = sm(rho, z).0;
        let fd = (up - um) / (2.0 * h);
        let d = tm.derivatives(t);
        let r2 = radius * radius;
        let lead = -(z - p.z) / r2 + rho / r2 * d.du_dtheta + b_dot * d.du_db;
        let trans = -sb(rho, z).2;
        fd2 += fd * fd;
        lead2 += (fd - lead).powi(2);
        trans2 += (fd - trans).powi(2);
    }
    Ok(SensitivityReport {
        h,
        ring_radius: radius,
        b_dot,
        leading_misfit: (lead2 / fd2).sqrt(),
        translation_misfit: (trans2 / fd2).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puncture::Puncture;
    use crate::solver::discretize;

    fn tangent_field(b: f64) -> MapField {
        let cfg = PunctureConfig::new(vec![Puncture::new(0.0, 1.0)]).unwrap();
        let spec = GridSpec::graded(0.0, 10.0, 64, 128, 0.1, 0.01);
        let d = Arc::new(discretize(&cfg, &spec).unwrap());
        let tm = TangentMap { a: 2.0, b };
        MapField::from_fn(d, vec![b], |r, z| {
            let rr = r.hypot(z);
            if rr == 0.0 {
                return (0.0, 0.0);
            }
            let (u, v) = tm.eval_cos(z / rr);
            (rr.ln() + u, v)
        })
    }

    #[test]
    fn fit_recovers_injected_parameter() {
        let f = tangent_field(0.3);
        let t = tangent_fit(&f, 0).unwrap();
        assert!((t.b - 0.3).abs() < 1e-6, "{}", t.b);
        assert!(!t.at_edge);
    }

    #[test]
    fn defect_of_tangent_map() {
        for b in [0.0, 0.3, -0.6] {
            let f = tangent_field(b);
            let d = alpha_defect(&f, 0, 0.4).unwrap();
            assert!((d - 2.0 * b.atanh()).abs() < 1e-4, "b = {b}: {d}");
        }
    }

    #[test]
    fn excision_energy_at_zero() {
        let tm = TangentMap { a: 2.0, b: 0.0 };
        let eps = 0.1;
        assert!((2.0 * PI * eps * tm.sphere_energy() - 2.0 * PI * PI * eps).abs() < 1e-14);
    }

    #[test]
    fn rings_must_fit() {
        let f = tangent_field(0.0);
        assert!(alpha_defect(&f, 0, 0.05).is_err());
        assert!(alpha_defect(&f, 0, 20.0).is_err());
        assert!(tangent_fit(&f, 1).is_err());
    }
}

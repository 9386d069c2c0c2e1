//! Model maps: partitions of unity that glue single-puncture Kerr maps into
//! an approximate solution, their tension, and the distance-ratio bounds
//! used to control them.
//!
//! Blending acts on `(u, v)`. Since the weights sum to one and
//! `U = u + ln ρ`, blending `U` gives the same map.

use crate::error::{invalid, Error, Result};
use crate::kerr::{kerr_eval_unchecked, KerrParams};
use crate::puncture::PunctureConfig;
use std::f64::consts::{FRAC_PI_4, PI};

/// C² quintic step: 0 below 0, 1 above 1.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// A single exactly harmonic map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constituent {
    Kerr(KerrParams),
    /// `U ≡ 0`, `v ≡ value`.
    Flat(f64),
}

impl Constituent {
    pub fn eval(&self, rho: f64, z: f64) -> (f64, f64) {
        match self {
            Constituent::Kerr(k) => kerr_eval_unchecked(k, rho, z),
            Constituent::Flat(v) => (0.0, *v),
        }
    }

    /// Rod values of `v` below and above the puncture.
    fn rods(&self) -> (f64, f64) {
        match self {
            Constituent::Kerr(k) => {
                let jump = 2.0 * k.angular_momentum();
                (k.offset - jump, k.offset + jump)
            }
            Constituent::Flat(v) => (*v, *v),
        }
    }
}

/// Radial cutoff `χ₀`: 0 inside `B_{δ/2}(p₀)`, 1 outside `B_δ(p₀)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialCutoff {
    pub center: f64,
    pub delta: f64,
}

impl RadialCutoff {
    pub fn eval(&self, rho: f64, z: f64) -> f64 {
        let r = rho.hypot(z - self.center);
        smoothstep((r - 0.5 * self.delta) / (0.5 * self.delta))
    }
}

/// Angular sector with vertex on the axis at `vertex`, opening over polar
/// angles `(lo, hi)`. `lower_weight` is 1 at `hi` and 0 at `lo`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector {
    pub vertex: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Sector {
    fn angle(&self, rho: f64, z: f64) -> f64 {
        rho.atan2(z - self.vertex)
    }

    pub fn contains(&self, rho: f64, z: f64) -> bool {
        let t = self.angle(rho, z);
        t > self.lo && t < self.hi
    }

    pub fn lower_weight(&self, rho: f64, z: f64) -> f64 {
        smoothstep((self.angle(rho, z) - self.lo) / (self.hi - self.lo))
    }
}

/// `Ξ = χ₀Θ₀ + (1 − χ₀) Σ χ̃ᵢΘᵢ` with one Kerr map per puncture, a far
/// map `Θ₀`, and angular cutoffs on sectors between neighbouring punctures.
///
/// Sector `j` sits at the midpoint between punctures `j` and `j+1` and opens
/// over `(3π/4 − (j+1)ϑ, 3π/4 − jϑ)` with `ϑ = π/(2(N−1))`. The sectors are
/// disjoint, so at most two angular weights vary at any point.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendedMap {
    pub far: Constituent,
    pub near: Vec<Constituent>,
    pub radial: RadialCutoff,
    pub sectors: Vec<Sector>,
    puncture_z: Vec<f64>,
}

impl BlendedMap {
    /// Two-puncture blend around a collision: `k1` below `k2`, both within
    /// `δ/4` of their midpoint, and `collision` outside `B_δ`.
    pub fn two_puncture(k1: KerrParams, k2: KerrParams, collision: Constituent, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return invalid("blend radius must be positive");
        }
        if k2.center_z <= k1.center_z {
            return invalid("first Kerr map must lie below the second");
        }
        if k2.center_z - k1.center_z >= 0.5 * delta {
            return Err(Error::Geometry(format!(
                "puncture separation {} is not below δ/2 = {}",
                k2.center_z - k1.center_z,
                0.5 * delta
            )));
        }
        let (c1, c2) = Constituent::Kerr(k1).rods();
        let (c2b, c3) = Constituent::Kerr(k2).rods();
        let (f_lo, f_hi) = collision.rods();
        let tol = 1e-10 * (1.0 + c1.abs() + c3.abs());
        if (c2 - c2b).abs() > tol || (f_lo - c1).abs() > tol || (f_hi - c3).abs() > tol {
            return invalid("rod values of the constituents do not match");
        }
        let mid = 0.5 * (k1.center_z + k2.center_z);
        Ok(Self {
            far: collision,
            near: vec![Constituent::Kerr(k1), Constituent::Kerr(k2)],
            radial: RadialCutoff { center: mid, delta },
            sectors: vec![Sector { vertex: mid, lo: FRAC_PI_4, hi: 3.0 * FRAC_PI_4 }],
            puncture_z: vec![k1.center_z, k2.center_z],
        })
    }

    /// Model map for a configuration: Kerr maps with the configuration's
    /// rod values, glued to the Kerr map of the total angular momentum (or
    /// the flat map if it vanishes) centered at the |J|-weighted center.
    pub fn for_config(config: &PunctureConfig) -> Result<Self> {
        let n = config.len();
        let rods = config.rods();
        let center = config.center();
        let far = if config.is_empty() || config.total_j() == 0.0 {
            Constituent::Flat(rods[0])
        } else {
            let off = 0.5 * (rods[0] + rods[n]);
            Constituent::Kerr(KerrParams::from_angular_momentum(config.total_j(), center, off)?)
        };
        let near = config
            .punctures()
            .iter()
            .enumerate()
            .map(|(i, p)| KerrParams::from_angular_momentum(p.j, p.z, config.offset(i)).map(Constituent::Kerr))
            .collect::<Result<Vec<_>>>()?;
        let span = config.punctures().iter().map(|p| (p.z - center).abs()).fold(0.0, f64::max);
        let gap = if n > 1 { config.min_gap() } else { 1.0 };
        let delta = 4.0 * span + 2.0 * gap;
        let mut sectors = Vec::new();
        if n > 1 {
            let step = PI / (2.0 * (n - 1) as f64);
            let z = config.z();
            for j in 0..n - 1 {
                let hi = 3.0 * FRAC_PI_4 - j as f64 * step;
                sectors.push(Sector { vertex: 0.5 * (z[j] + z[j + 1]), lo: hi - step, hi });
            }
        }
        Ok(Self {
            far,
            near,
            radial: RadialCutoff { center, delta },
            sectors,
            puncture_z: config.z(),
        })
    }

    /// Weights `(χ₀, χ₁, …, χ_N)`; they sum to one.
    pub fn weights(&self, rho: f64, z: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.near.len() + 1];
        if self.near.is_empty() {
            w[0] = 1.0;
            return w;
        }
        let chi0 = self.radial.eval(rho, z);
        w[0] = chi0;
        for (i, &a) in self.angular_weights(rho, z).iter().enumerate() {
            w[i + 1] = (1.0 - chi0) * a;
        }
        w
    }

    /// Angular partition `χ̃ᵢ`, before the radial cutoff.
    pub fn angular_weights(&self, rho: f64, z: f64) -> Vec<f64> {
        let n = self.near.len();
        let mut w = vec![0.0; n];
        if n == 0 {
            return w;
        }
        if let Some((j, s)) = self.sectors.iter().enumerate().find(|(_, s)| s.contains(rho, z)) {
            let lw = s.lower_weight(rho, z);
            w[j] = lw;
            w[j + 1] = 1.0 - lw;
            return w;
        }
        let above = self.sectors.iter().filter(|s| s.angle(rho, z) <= s.lo).count();
        w[above.min(n - 1)] = 1.0;
        w
    }

    /// `(U, v)` of the blend.
    pub fn eval(&self, rho: f64, z: f64) -> (f64, f64) {
        let w = self.weights(rho, z);
        let mut u = 0.0;
        let mut v = 0.0;
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let c = if k == 0 { &self.far } else { &self.near[k - 1] };
            let (uk, vk) = c.eval(rho, z);
            u += wk * uk;
            v += wk * vk;
        }
        (u, v)
    }

    fn step_size(&self, rho: f64, z: f64) -> f64 {
        let mut m = rho;
        for &p in &self.puncture_z {
            m = m.min(rho.hypot(z - p));
        }
        1e-4f64.max(1e-3 * m)
    }

    /// Tension magnitude `|τ(Ξ)|` in the target metric, by centered finite
    /// differences. With `U = u + ln ρ` and `ln ρ` harmonic,
    /// `τ_u = ΔU − 2e^{4U}ρ⁻⁴|∇v|²` and `τ_v = Δv + 4∇U·∇v − 4∂ρv/ρ`, and
    /// `|τ|² = τ_u² + e^{4u} τ_v²`.
    pub fn tension(&self, rho: f64, z: f64) -> Result<f64> {
        let h = self.step_size(rho, z);
        if rho <= 2.0 * h {
            return Err(Error::InvalidInput("tension is not defined on the axis".into()));
        }
        for &p in &self.puncture_z {
            if rho.hypot(z - p) <= 2.0 * h {
                return Err(Error::InvalidInput("tension evaluated at a puncture".into()));
            }
        }
        Ok(tension_fd(|r, z| self.eval(r, z), rho, z, h))
    }
}

/// Tension of any `(U, v)` map by second-order centered differences.
pub fn tension_fd(map: impl Fn(f64, f64) -> (f64, f64), rho: f64, z: f64, h: f64) -> f64 {
    let c = map(rho, z);
    let e = map(rho + h, z);
    let w = map(rho - h, z);
    let n = map(rho, z + h);
    let s = map(rho, z - h);
    let lap = |f: fn((f64, f64)) -> f64| {
        (f(e) - 2.0 * f(c) + f(w)) / (h * h) + (f(e) - f(w)) / (2.0 * h * rho) + (f(n) - 2.0 * f(c) + f(s)) / (h * h)
    };
    let uu = |p: (f64, f64)| p.0;
    let vv = |p: (f64, f64)| p.1;
    let (ur, uz) = ((e.0 - w.0) / (2.0 * h), (n.0 - s.0) / (2.0 * h));
    let (vr, vz) = ((e.1 - w.1) / (2.0 * h), (n.1 - s.1) / (2.0 * h));
    let e4u = (4.0 * c.0).exp() / rho.powi(4);
    let tu = lap(uu) - 2.0 * e4u * (vr * vr + vz * vz);
    let tv = lap(vv) + 4.0 * (ur * vr + uz * vz) - 4.0 * vr / rho;
    (tu * tu + e4u * tv * tv).sqrt()
}

/// Outcome of checking one distance-ratio bound on a sample set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LemmaReport {
    /// Whether the geometric hypotheses on the base points hold.
    pub hypothesis_ok: bool,
    pub checked: usize,
    /// Samples outside the region where the bound is claimed.
    pub skipped: usize,
    pub violations: usize,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.hypothesis_ok && self.violations == 0
    }
}

fn dist(p: (f64, f64), z: f64) -> f64 {
    p.0.hypot(p.1 - z)
}

/// With `p₁, p₂ = ∓2η` on the axis: `r₁/r₂ ≤ 5` where `z > 0` and `r₂ > η`.
/// Samples are `(ρ, z)` pairs.
pub fn check_ratio_upper_half(eta: f64, samples: &[(f64, f64)]) -> LemmaReport {
    let mut rep = LemmaReport { hypothesis_ok: eta > 0.0, ..Default::default() };
    for &p in samples {
        let (r1, r2) = (dist(p, -2.0 * eta), dist(p, 2.0 * eta));
        if p.1 > 0.0 && r2 > eta {
            rep.checked += 1;
            if r1 / r2 > 5.0 {
                rep.violations += 1;
            }
        } else {
            rep.skipped += 1;
        }
    }
    rep
}

/// For axis points `z1 ≠ z2` with `4η = |z1 − z2|`: `1/5 ≤ r₁/r₂ ≤ 5`
/// outside both balls of radius `η`.
pub fn check_ratio_two_sided(z1: f64, z2: f64, samples: &[(f64, f64)]) -> LemmaReport {
    let eta = 0.25 * (z2 - z1).abs();
    let mut rep = LemmaReport { hypothesis_ok: eta > 0.0, ..Default::default() };
    for &p in samples {
        let (r1, r2) = (dist(p, z1), dist(p, z2));
        if r1 > eta && r2 > eta {
            rep.checked += 1;
            let q = r1 / r2;
            if !(0.2..=5.0).contains(&q) {
                rep.violations += 1;
            }
        } else {
            rep.skipped += 1;
        }
    }
    rep
}

/// For `z1, z2` at distance `4η`, `p₀` their midpoint and
/// `B_η(pᵢ) ⊂ B_{δ/4}(p₀)`: outside `B_{δ/2}(p₀)`,
/// `|λ ln r₁ + (1−λ) ln r₂ − ln r₀| ≤ ln 2` and `|∇ ln rᵢ| ≤ 2/r₀`.
pub fn check_log_average(z1: f64, z2: f64, delta: f64, lambda: f64, samples: &[(f64, f64)]) -> LemmaReport {
    let eta = 0.25 * (z2 - z1).abs();
    let p0 = 0.5 * (z1 + z2);
    let ok = eta > 0.0 && 3.0 * eta <= 0.25 * delta && (0.0..=1.0).contains(&lambda);
    let mut rep = LemmaReport { hypothesis_ok: ok, ..Default::default() };
    let ln2 = std::f64::consts::LN_2;
    for &p in samples {
        let r0 = dist(p, p0);
        if r0 <= 0.5 * delta {
            rep.skipped += 1;
            continue;
        }
        rep.checked += 1;
        let (r1, r2) = (dist(p, z1), dist(p, z2));
        let avg = lambda * r1.ln() + (1.0 - lambda) * r2.ln() - r0.ln();
        let grad_ok = 1.0 / r1 <= 2.0 / r0 && 1.0 / r2 <= 2.0 / r0;
        if avg.abs() > ln2 || !grad_ok {
            rep.violations += 1;
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puncture::Puncture;

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_puncture_model_is_kerr() {
        let cfg = PunctureConfig::new(vec![Puncture::new(0.3, 2.0)]).unwrap();
        let m = BlendedMap::for_config(&cfg).unwrap();
        let k = KerrParams::from_angular_momentum(2.0, 0.3, 0.0).unwrap();
        for &(r, z) in &[(0.1, 0.0), (3.0, 5.0), (0.0, -2.0), (50.0, 1.0)] {
            let (a, b) = m.eval(r, z);
            let (c, d) = kerr_eval_unchecked(&k, r, z);
            assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
        }
    }

    #[test]
    fn model_hits_rod_values() {
        let cfg = PunctureConfig::new(vec![
            Puncture::new(-2.0, 1.0),
            Puncture::new(0.0, -0.5),
            Puncture::new(1.5, 2.0),
        ])
        .unwrap();
        let m = BlendedMap::for_config(&cfg).unwrap();
        for &z in &[-50.0, -3.0, -1.0, 0.7, 2.0, 40.0] {
            let v = m.eval(0.0, z).1;
            let c = cfg.rods()[cfg.rod_index(z)];
            assert!((v - c).abs() < 1e-12, "z = {z}: {v} vs {c}");
        }
    }

    #[test]
    fn lemma_on_midplane() {
        let r = check_ratio_two_sided(-2.0, 2.0, &[(3.0, 0.0)]);
        assert_eq!(r.checked, 1);
        assert!(r.passed());
    }
}

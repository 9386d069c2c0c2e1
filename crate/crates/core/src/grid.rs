//! Tensor grids on the half plane `ρ ≥ 0`.
//!
//! Without grading the axes are uniform. With `h_min` set, the spacing grows
//! linearly with distance to the nearest anchor (the axis for `ρ`, each
//! puncture for `z`): `h(x) ≈ h_min + κ·dist(x)`. Anchors are grid nodes.

use crate::error::{invalid, Error, Result};
use crate::puncture::PunctureConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rho_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_rho: usize,
    pub n_z: usize,
    /// Radius ε of the disk removed around each puncture.
    pub excision_radius: f64,
    /// Smallest spacing of a graded grid; `None` means uniform.
    #[serde(default)]
    pub h_min: Option<f64>,
}

impl GridSpec {
    /// Graded square-ish domain of half-width `r_max` around `center`.
    pub fn graded(center: f64, r_max: f64, n_rho: usize, n_z: usize, eps: f64, h_min: f64) -> Self {
        Self {
            rho_max: r_max,
            z_min: center - r_max,
            z_max: center + r_max,
            n_rho,
            n_z,
            excision_radius: eps,
            h_min: Some(h_min),
        }
    }

    pub fn translated(&self, dz: f64) -> Self {
        Self { z_min: self.z_min + dz, z_max: self.z_max + dz, ..self.clone() }
    }

    pub fn mirrored(&self) -> Self {
        Self { z_min: -self.z_max, z_max: -self.z_min, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.rho_max, self.z_min, self.z_max, self.excision_radius]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return invalid("grid bounds must be finite");
        }
        if self.rho_max <= 0.0 || self.z_max <= self.z_min {
            return invalid("grid bounds are empty");
        }
        if self.n_rho < 4 || self.n_z < 4 {
            return invalid("grid needs at least 4 nodes per direction");
        }
        if self.excision_radius <= 0.0 {
            return invalid("excision radius must be positive");
        }
        if let Some(h) = self.h_min {
            if !(h > 0.0 && h.is_finite()) {
                return invalid("h_min must be positive");
            }
        }
        Ok(())
    }
}

/// Node coordinates of a tensor grid. Node `(i, j)` has flat index
/// `j·n_rho + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub rho: Vec<f64>,
    pub z: Vec<f64>,
    /// Intervals per segment of the `z` axis, reusable for moved anchors.
    pub z_counts: Vec<usize>,
}

impl Grid {
    pub fn n_rho(&self) -> usize {
        self.rho.len()
    }

    pub fn n_z(&self) -> usize {
        self.z.len()
    }

    pub fn len(&self) -> usize {
        self.rho.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.rho.len() + i
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let nr = self.rho.len();
        (self.rho[k % nr], self.z[k / nr])
    }

    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.rho == other.rho && self.z == other.z
    }

    /// Build the grid for a configuration. `z_counts` pins the number of
    /// intervals in each `z` segment (between consecutive anchors); pass the
    /// counts of an earlier grid to move nodes continuously with punctures.
    pub fn build(spec: &GridSpec, config: &PunctureConfig, z_counts: Option<&[usize]>) -> Result<Self> {
        spec.validate()?;
        let zs = config.z();
        for &z in &zs {
            if z - spec.excision_radius <= spec.z_min || z + spec.excision_radius >= spec.z_max {
                return Err(Error::Geometry(format!(
                    "puncture at z = {z} is not inside the grid with its excision disk"
                )));
            }
        }
        if spec.excision_radius >= spec.rho_max {
            return Err(Error::Geometry("excision disk reaches the outer boundary".into()));
        }
        if config.len() > 1 && config.min_gap() <= 2.0 * spec.excision_radius {
            return Err(Error::Geometry("excision disks overlap".into()));
        }
        let (rho, _) = graded_axis(&[0.0], 0.0, spec.rho_max, spec.n_rho, spec.h_min, None)?;
        let (z, z_counts) = graded_axis(&zs, spec.z_min, spec.z_max, spec.n_z, spec.h_min, z_counts)?;
        let grid = Self { rho, z, z_counts };
        grid.check_resolution(spec, &zs)?;
        Ok(grid)
    }

    fn check_resolution(&self, spec: &GridSpec, zs: &[f64]) -> Result<()> {
        let eps = spec.excision_radius;
        let limit = eps / 4.0 * (1.0 + 1e-9);
        let too_coarse = |x: &[f64], center: f64| {
            x.windows(2)
                .filter(|w| w[1] > center - 2.0 * eps && w[0] < center + 2.0 * eps)
                .any(|w| w[1] - w[0] > limit)
        };
        if !zs.is_empty() && too_coarse(&self.rho, 0.0) {
            return Err(Error::Geometry(format!(
                "ρ spacing near the axis exceeds ε/4 = {}",
                eps / 4.0
            )));
        }
        for &z in zs {
            if too_coarse(&self.z, z) {
                return Err(Error::Geometry(format!(
                    "z spacing near the puncture at {z} exceeds ε/4 = {}",
                    eps / 4.0
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
enum Segment {
    /// Anchor at the left end only.
    Left,
    /// Anchor at the right end only.
    Right,
    /// Anchors at both ends.
    Both,
    /// No anchors: uniform.
    Free,
}

/// Logical length of a half-segment of physical length `len` for spacing
/// `h + k·d`: `∫ dx / (h + k x) = ln(1 + k len / h) / k`.
fn stretch(len: f64, h: f64, k: f64) -> f64 {
    if k * len < 1e-9 * h {
        len / h
    } else {
        (k * len / h).ln_1p() / k
    }
}

fn seg_length(kind: Segment, len: f64, h: f64, k: f64) -> f64 {
    match kind {
        Segment::Both => 2.0 * stretch(0.5 * len, h, k),
        Segment::Left | Segment::Right => stretch(len, h, k),
        Segment::Free => len / h,
    }
}

/// Largest `k ≥ 0` with `target ≤ total(k)`, by bisection on a decreasing map.
fn solve_rate(total: impl Fn(f64) -> f64, target: f64) -> f64 {
    if total(0.0) <= target {
        return 0.0;
    }
    let mut hi = 1.0;
    while total(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Graded nodes on `[lo, hi]` with every anchor in `(lo, hi)` (or at `lo`)
/// as a node. Returns the nodes and the interval count of each segment.
pub fn graded_axis(
    anchors: &[f64],
    lo: f64,
    hi: f64,
    n: usize,
    h_min: Option<f64>,
    counts: Option<&[usize]>,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if n < 2 || hi <= lo {
        return invalid("axis needs two nodes and a nonempty interval");
    }
    let Some(h) = h_min else {
        let step = (hi - lo) / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect();
        return Ok((x, vec![n - 1]));
    };

    let inner: Vec<f64> = anchors.iter().copied().filter(|&a| a >= lo && a < hi).collect();
    let mut breaks = vec![lo];
    for &a in &inner {
        if a > lo {
            breaks.push(a);
        }
    }
    breaks.push(hi);
    let anchored_lo = inner.first().is_some_and(|&a| a == lo);
    let nseg = breaks.len() - 1;
    let kinds: Vec<Segment> = (0..nseg)
        .map(|s| {
            let left = s > 0 || anchored_lo;
            let right = s + 1 < nseg;
            match (left, right) {
                (true, true) => Segment::Both,
                (true, false) => Segment::Left,
                (false, true) => Segment::Right,
                (false, false) => Segment::Free,
            }
        })
        .collect();
    let lens: Vec<f64> = breaks.windows(2).map(|w| w[1] - w[0]).collect();

    let counts: Vec<usize> = match counts {
        Some(c) => {
            if c.len() != nseg || c.iter().sum::<usize>() != n - 1 {
                return invalid("pinned segment counts do not match the axis");
            }
            c.to_vec()
        }
        None => {
            let total = |k: f64| -> f64 {
                kinds.iter().zip(&lens).map(|(&t, &l)| seg_length(t, l, h, k)).sum()
            };
            let k = solve_rate(total, (n - 1) as f64);
            let shares: Vec<f64> = kinds.iter().zip(&lens).map(|(&t, &l)| seg_length(t, l, h, k)).collect();
            apportion(&shares, n - 1)?
        }
    };

    let mut x = Vec::with_capacity(n);
    x.push(lo);
    for s in 0..nseg {
        let (a, b, len, m) = (breaks[s], breaks[s + 1], lens[s], counts[s]);
        if m == 0 {
            return invalid("segment without intervals");
        }
        let k = solve_rate(|k| seg_length(kinds[s], len, h, k), m as f64);
        let mf = m as f64;
        // distance from an anchor after logical length t
        let dist = |t: f64| if k == 0.0 { t } else { h * ((k * t).exp() - 1.0) / k };
        for q in 1..=m {
            let t = q as f64;
            let p = if q == m {
                b
            } else {
                match kinds[s] {
                    Segment::Free => a + len * t / mf,
                    Segment::Left => {
                        if k == 0.0 { a + len * t / mf } else { a + dist(t) }
                    }
                    Segment::Right => {
                        if k == 0.0 { a + len * t / mf } else { b - dist(mf - t) }
                    }
                    Segment::Both => {
                        if k == 0.0 {
                            a + len * t / mf
                        } else if t <= 0.5 * mf {
                            a + dist(t)
                        } else {
                            b - dist(mf - t)
                        }
                    }
                }
            };
            x.push(p);
        }
    }
    Ok((x, counts))
}

/// Integer split of `total` proportional to `shares`, at least one each.
fn apportion(shares: &[f64], total: usize) -> Result<Vec<usize>> {
    let m = shares.len();
    if total < m {
        return invalid("too few nodes for the number of anchors");
    }
    let sum: f64 = shares.iter().sum();
    let ideal: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut out: Vec<usize> = ideal.iter().map(|x| (x.floor() as usize).max(1)).collect();
    let mid = (m as f64 - 1.0) / 2.0;
    let mut order: Vec<usize> = (0..m).collect();
    while out.iter().sum::<usize>() != total {
        let grow = out.iter().sum::<usize>() < total;
        // prefer the segment furthest from its ideal; ties go to the middle
        order.sort_by(|&p, &q| {
            let dp = ideal[p] - out[p] as f64;
            let dq = ideal[q] - out[q] as f64;
            let key = if grow { dq.total_cmp(&dp) } else { dp.total_cmp(&dq) };
            key.then((p as f64 - mid).abs().total_cmp(&(q as f64 - mid).abs())).then(p.cmp(&q))
        });
        let pick = order
            .iter()
            .copied()
            .find(|&s| grow || out[s] > 1)
            .ok_or_else(|| Error::InvalidInput("cannot apportion grid nodes".into()))?;
        if grow {
            out[pick] += 1;
        } else {
            out[pick] -= 1;
        }
    }
    Ok(out)
}

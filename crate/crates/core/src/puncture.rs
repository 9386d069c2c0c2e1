//! Puncture configurations: ordered axis points with angular momenta, and the
//! rod values of the twist potential they induce.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Puncture {
    pub z: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

impl Puncture {
    pub fn new(z: f64, j: f64) -> Self {
        Self { z, j }
    }
}

/// Punctures sorted by `z`, plus the rod values `c₁ … c_{N+1}` of `v`.
///
/// `c_{i+1} − c_i = 4Jᵢ` and, before any gauge shift, `c₁ = −2ΣJ`, so the
/// rod values are antisymmetric for mirror-symmetric data.
#[derive(Clone, Debug, PartialEq)]
pub struct PunctureConfig {
    punctures: Vec<Puncture>,
    rods: Vec<f64>,
    gauge: f64,
}

impl PunctureConfig {
    pub fn new(punctures: Vec<Puncture>) -> Result<Self> {
        Self::with_gauge(punctures, 0.0)
    }

    /// As [`PunctureConfig::new`] with every rod value shifted by `gauge`.
    pub fn with_gauge(punctures: Vec<Puncture>, gauge: f64) -> Result<Self> {
        for p in &punctures {
            if !p.z.is_finite() || !p.j.is_finite() {
                return invalid("puncture position and angular momentum must be finite");
            }
            if p.j == 0.0 {
                return invalid(format!("puncture at z = {} has zero angular momentum", p.z));
            }
        }
        for w in punctures.windows(2) {
            if w[1].z <= w[0].z {
                if w[1].z == w[0].z {
                    return invalid(format!("coincident punctures at z = {}", w[0].z));
                }
                return invalid("punctures must be ordered by increasing z");
            }
        }
        if !gauge.is_finite() {
            return invalid("gauge shift must be finite");
        }
        let total: f64 = punctures.iter().map(|p| p.j).sum();
        let mut rods = Vec::with_capacity(punctures.len() + 1);
        rods.push(-2.0 * total + gauge);
        for p in &punctures {
            let last = *rods.last().unwrap();
            rods.push(last + 4.0 * p.j);
        }
        Ok(Self { punctures, rods, gauge })
    }

    pub fn punctures(&self) -> &[Puncture] {
        &self.punctures
    }

    pub fn len(&self) -> usize {
        self.punctures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.punctures.is_empty()
    }

    pub fn z(&self) -> Vec<f64> {
        self.punctures.iter().map(|p| p.z).collect()
    }

    pub fn j(&self) -> Vec<f64> {
        self.punctures.iter().map(|p| p.j).collect()
    }

    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    /// Rod values `c₁ … c_{N+1}` (zero-based here).
    pub fn rods(&self) -> &[f64] {
        &self.rods
    }

    /// Rod containing the axis point `z` (number of punctures below it).
    pub fn rod_index(&self, z: f64) -> usize {
        self.punctures.iter().take_while(|p| p.z < z).count()
    }

    /// Midpoint of the rod values on both sides of puncture `i`.
    pub fn offset(&self, i: usize) -> f64 {
        0.5 * (self.rods[i] + self.rods[i + 1])
    }

    pub fn total_j(&self) -> f64 {
        self.punctures.iter().map(|p| p.j).sum()
    }

    /// |J|-weighted mean position; 0 for an empty configuration.
    pub fn center(&self) -> f64 {
        let w: f64 = self.punctures.iter().map(|p| p.j.abs()).sum();
        if w == 0.0 {
            return 0.0;
        }
        self.punctures.iter().map(|p| p.j.abs() * p.z).sum::<f64>() / w
    }

    pub fn min_gap(&self) -> f64 {
        self.punctures
            .windows(2)
            .map(|w| w[1].z - w[0].z)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_gap(&self) -> f64 {
        self.punctures.windows(2).map(|w| w[1].z - w[0].z).fold(0.0, f64::max)
    }

    /// Same angular momenta at new positions.
    pub fn moved(&self, z: &[f64]) -> Result<Self> {
        if z.len() != self.len() {
            return invalid("position vector has the wrong length");
        }
        let p = self.punctures.iter().zip(z).map(|(p, &z)| Puncture::new(z, p.j)).collect();
        Self::with_gauge(p, self.gauge)
    }

    pub fn translated(&self, dz: f64) -> Result<Self> {
        let z: Vec<f64> = self.punctures.iter().map(|p| p.z + dz).collect();
        self.moved(&z)
    }

    /// Image under `z -> −z`. The rod values map to `c'_j = −c_{N+2−j}`,
    /// which is again the canonical gauge with the angular momenta reversed.
    pub fn mirrored(&self) -> Result<Self> {
        let p = self.punctures.iter().rev().map(|p| Puncture::new(-p.z, p.j)).collect();
        Self::with_gauge(p, -self.gauge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rods_from_angular_momenta() {
        let c = PunctureConfig::new(vec![Puncture::new(-1.0, 1.0), Puncture::new(2.0, 0.5)]).unwrap();
        assert_eq!(c.rods(), &[-3.0, 1.0, 3.0]);
        assert_eq!(c.rod_index(-5.0), 0);
        assert_eq!(c.rod_index(0.0), 1);
        assert_eq!(c.rod_index(9.0), 2);
        assert_eq!(c.offset(0), -1.0);
    }

    #[test]
    fn validation() {
        assert!(PunctureConfig::new(vec![Puncture::new(0.0, 0.0)]).is_err());
        assert!(PunctureConfig::new(vec![Puncture::new(0.0, 1.0), Puncture::new(0.0, 1.0)]).is_err());
        assert!(PunctureConfig::new(vec![Puncture::new(1.0, 1.0), Puncture::new(0.0, 1.0)]).is_err());
        assert!(PunctureConfig::new(vec![]).unwrap().rods() == [0.0]);
    }

    #[test]
    fn mirror_is_an_involution() {
        let c = PunctureConfig::with_gauge(
            vec![Puncture::new(-1.0, 1.0), Puncture::new(0.5, -2.0), Puncture::new(3.0, 0.7)],
            0.25,
        )
        .unwrap();
        let m = c.mirrored().unwrap();
        assert_eq!(m.z(), vec![-3.0, -0.5, 1.0]);
        for (a, b) in m.rods().iter().zip(c.rods().iter().rev()) {
            assert!((a + b).abs() < 1e-14);
        }
        assert_eq!(m.mirrored().unwrap(), c);
    }
}

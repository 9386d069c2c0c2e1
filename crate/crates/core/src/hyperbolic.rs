//! Hyperbolic plane in horospherical coordinates.
//!
//! The metric is `du² + e^{4u} dv²` (curvature −4). Points are `(u, v)`.

use crate::error::{invalid, Error, Result};
use crate::field::MapField;

/// A point of the target plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPoint {
    pub u: f64,
    pub v: f64,
}

impl HPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Image under the isometry `(u, v) -> (u + c, e^{-2c} v)`.
    pub fn dilate(self, c: f64) -> Self {
        Self::new(self.u + c, (-2.0 * c).exp() * self.v)
    }
}

// Above this value of cosh(2d) the log form is exact to double precision.
const LOG_BRANCH: f64 = 1e15;

/// Geodesic distance, from `cosh 2d = cosh 2(u₁−u₂) + 2e^{2(u₁+u₂)}(v₁−v₂)²`.
pub fn distance(p: HPoint, q: HPoint) -> f64 {
    if p == q {
        return 0.0;
    }
    let du = (p.u - q.u).abs();
    let dv = (p.v - q.v).abs();
    let s = 2.0 * (p.u + q.u);

    // Work with x = cosh(2d) - 1 so small distances keep their precision.
    let ln_twist = if dv > 0.0 {
        s + (2.0 * dv * dv).ln()
    } else {
        f64::NEG_INFINITY
    };
    let ln_x = if du > 0.0 {
        // cosh(2du) - 1 = 2 sinh²(du)
        let ln_c = if du > 30.0 {
            2.0 * du - std::f64::consts::LN_2
        } else {
            (2.0 * du.sinh().powi(2)).ln()
        };
        log_add_exp(ln_c, ln_twist)
    } else {
        ln_twist
    };

    if ln_x > LOG_BRANCH.ln() {
        // arccosh(y) = ln(2y) up to O(y⁻²)
        return 0.5 * (ln_x + std::f64::consts::LN_2);
    }
    let x = ln_x.exp().max(0.0);
    // arccosh(1 + x) = ln(1 + x + sqrt(x(2 + x)))
    0.5 * (x + (x * (2.0 + x)).sqrt()).ln_1p()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `Λ(d) = sqrt(1 + d²)`.
pub fn lambda_comparison(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return invalid(format!("distance must be nonnegative, got {d}"));
    }
    Ok((1.0 + d * d).sqrt())
}

/// Pointwise distance between two fields on the same grid.
///
/// Off the axis `u = U − ln ρ`. On the axis both maps sit at the boundary
/// point of their rod, so the distance is `|U_F − U_G|` when the rod values
/// agree and infinite otherwise.
pub fn distance_field(f: &MapField, g: &MapField) -> Result<Vec<f64>> {
    if !f.grid().same_geometry(g.grid()) {
        return Err(Error::Geometry("distance_field: grid mismatch".into()));
    }
    let nr = f.grid().n_rho();
    let mut out = Vec::with_capacity(f.big_u.len());
    for (k, (&uf, &ug)) in f.big_u.iter().zip(&g.big_u).enumerate() {
        let i = k % nr;
        let rho = f.grid().rho[i];
        let (vf, vg) = (f.v[k], g.v[k]);
        if i == 0 {
            let scale = 1.0 + vf.abs().max(vg.abs());
            if (vf - vg).abs() <= 1e-12 * scale {
                out.push((uf - ug).abs());
            } else {
                out.push(f64::INFINITY);
            }
        } else {
            let lr = rho.ln();
            out.push(distance(HPoint::new(uf - lr, vf), HPoint::new(ug - lr, vg)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn same_point_is_zero() {
        let p = HPoint::new(0.3, 1.2);
        assert_eq!(distance(p, p), 0.0);
    }

    #[test]
    fn unit_twist_at_unit_height() {
        let d = distance(HPoint::new(0.0, 0.0), HPoint::new(0.0, 1.0));
        assert_relative_eq!(d, 0.5 * 3f64.acosh(), epsilon = 1e-15);
        assert_relative_eq!(d, 0.881373587019543, epsilon = 1e-12);
    }

    #[test]
    fn vertical_geodesic() {
        let d = distance(HPoint::new(-0.7, 2.0), HPoint::new(1.1, 2.0));
        assert_relative_eq!(d, 1.8, epsilon = 1e-14);
    }

    #[test]
    fn no_overflow_near_boundary() {
        let d = distance(HPoint::new(300.0, 0.0), HPoint::new(299.0, 5.0));
        assert!(d.is_finite());
        // cosh 2d ≈ 2 e^{2·599}·25 and arccosh y ≈ ln 2y
        let expect = 0.5 * ((4.0f64 * 25.0).ln() + 2.0 * 599.0);
        assert_relative_eq!(d, expect, epsilon = 1e-12);
    }

    #[test]
    fn log_branch_is_continuous() {
        // pick dv so that cosh(2d) straddles the branch point
        for &dv in &[3.0e7, 3.2e7, 3.4e7] {
            let p = HPoint::new(0.0, 0.0);
            let q = HPoint::new(0.0, dv);
            let exact = 0.5 * (1.0 + 2.0 * dv * dv).acosh();
            assert_relative_eq!(distance(p, q), exact, max_relative = 1e-14);
        }
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_comparison(0.0).unwrap(), 1.0);
        assert_relative_eq!(lambda_comparison(3f64.sqrt()).unwrap(), 2.0, epsilon = 1e-15);
        let d = 0.5 * 3f64.acosh();
        assert_relative_eq!(lambda_comparison(d).unwrap(), 1.332_973_9, epsilon = 1e-7);
        assert!(lambda_comparison(-1e-3).is_err());
        assert!(lambda_comparison(f64::NAN).is_err());
    }
}

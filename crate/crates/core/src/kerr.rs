//! Closed-form maps: extreme Kerr, renormalized tangent maps at a puncture,
//! and the dissipation functions f₃, f₄.
//!
//! Two length scales are attached to an angular momentum `J`. The Kerr
//! parameter is `√|J|`, the tangent-map scale is `2|J|`. Only
//! [`kerr_parameter`] and [`tangent_scale`] convert between them.

use crate::error::{invalid, Result};
use crate::quadrature::integrate_default;
use std::f64::consts::PI;

/// Kerr parameter `a` with `a² = |J|`.
pub fn kerr_parameter(j: f64) -> f64 {
    j.abs().sqrt()
}

/// Tangent-map scale `a = 2|J|`.
pub fn tangent_scale(j: f64) -> f64 {
    2.0 * j.abs()
}

/// Extreme Kerr map centered on the axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KerrParams {
    pub a_kerr: f64,
    pub center_z: f64,
    /// ±1, orientation of the angular momentum.
    pub sign: f64,
    /// Constant added to the twist potential.
    pub offset: f64,
}

impl KerrParams {
    pub fn new(a_kerr: f64, center_z: f64, sign: f64, offset: f64) -> Result<Self> {
        if !(a_kerr > 0.0 && a_kerr.is_finite()) {
            return invalid(format!("Kerr parameter must be positive, got {a_kerr}"));
        }
        if sign != 1.0 && sign != -1.0 {
            return invalid(format!("orientation must be ±1, got {sign}"));
        }
        if !center_z.is_finite() || !offset.is_finite() {
            return invalid("Kerr center and offset must be finite");
        }
        Ok(Self { a_kerr, center_z, sign, offset })
    }

    pub fn from_angular_momentum(j: f64, center_z: f64, offset: f64) -> Result<Self> {
        if j == 0.0 || !j.is_finite() {
            return invalid(format!("angular momentum must be nonzero, got {j}"));
        }
        Self::new(kerr_parameter(j), center_z, j.signum(), offset)
    }

    pub fn angular_momentum(&self) -> f64 {
        self.sign * self.a_kerr * self.a_kerr
    }

    /// The tangent map this Kerr map converges to at its puncture.
    pub fn tangent(&self) -> TangentMap {
        TangentMap { a: tangent_scale(self.angular_momentum()), b: 0.0 }
    }
}

/// Renormalized tangent map with scale `a > 0` and parameter `|b| < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentMap {
    pub a: f64,
    pub b: f64,
}

impl TangentMap {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return invalid(format!("tangent scale must be positive, got {a}"));
        }
        if !(b.abs() < 1.0) {
            return invalid(format!("tangent parameter must lie in (-1, 1), got {b}"));
        }
        Ok(Self { a, b })
    }

    pub fn from_angular_momentum(j: f64, b: f64) -> Result<Self> {
        Self::new(tangent_scale(j), b)
    }

    /// `(Ū, v̄)` as functions of `cos θ`.
    pub fn eval_cos(&self, c: f64) -> (f64, f64) {
        let (a, b) = (self.a, self.b);
        let d = 1.0 + c * c + 2.0 * b * c;
        let ubar = -0.5 * (2.0 * a * (1.0 - b * b).sqrt() / d).ln();
        let vbar = a * (b + b * c * c + 2.0 * c) / d;
        (ubar, vbar)
    }

    /// `(Ū, v̄)` at polar angle θ.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        self.eval_cos(theta.cos())
    }

    /// `e^{4ū}` where `ū = Ū − ln sin θ`.
    pub fn weight(&self, theta: f64) -> f64 {
        let (c, s) = (theta.cos(), theta.sin());
        let d = 1.0 + c * c + 2.0 * self.b * c;
        let e = d / (2.0 * self.a * (1.0 - self.b * self.b).sqrt());
        e * e / s.powi(4)
    }

    pub fn derivatives(&self, theta: f64) -> TangentDerivatives {
        let (a, b) = (self.a, self.b);
        let (c, s) = (theta.cos(), theta.sin());
        let d = 1.0 + c * c + 2.0 * b * c;
        TangentDerivatives {
            du_dtheta: -s * (c + b) / d,
            dv_dtheta: -2.0 * a * (1.0 - b * b) * s.powi(3) / (d * d),
            du_db: b / (2.0 * (1.0 - b * b)) + c / d,
            dv_db: a * s.powi(4) / (d * d),
        }
    }

    /// Both sides of the two pointwise identities satisfied by tangent maps:
    /// `e^{4ū} ∂θv̄ = −1/(2a sin θ)` and
    /// `1 + (∂θŪ)² + e^{4ū}(∂θv̄)² = 2(1 + b cos θ)/(1 + cos²θ + 2b cos θ)`.
    pub fn identity_check(&self, theta: f64) -> IdentityCheck {
        let dv = self.derivatives(theta);
        let w = self.weight(theta);
        let (c, s) = (theta.cos(), theta.sin());
        let d = 1.0 + c * c + 2.0 * self.b * c;
        IdentityCheck {
            lhs1: w * dv.dv_dtheta,
            rhs1: -1.0 / (2.0 * self.a * s),
            lhs2: 1.0 + dv.du_dtheta.powi(2) + w * dv.dv_dtheta.powi(2),
            rhs2: 2.0 * (1.0 + self.b * c) / d,
        }
    }

    /// Energy density `1 + (∂θŪ)² + e^{4ū}(∂θv̄)²` integrated against
    /// `sin θ dθ`; the energy in a ball of radius ε is `2π ε` times this.
    pub fn sphere_energy(&self) -> f64 {
        // ∫₋₁¹ 2(1+bc)/(1+c²+2bc) dc, closed form
        let b = self.b;
        let q = (1.0 - b * b).sqrt();
        // 1+c²+2bc = (c+b)² + q²
        let atan_part = ((1.0 + b) / q).atan() - ((b - 1.0) / q).atan();
        let log_part = ((2.0 + 2.0 * b) / (2.0 - 2.0 * b)).ln();
        // 2(1+bc) = 2b(c+b) + 2(1-b²)
        b * log_part + 2.0 * q * atan_part
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentDerivatives {
    pub du_dtheta: f64,
    pub dv_dtheta: f64,
    pub du_db: f64,
    pub dv_db: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
}

pub fn tangent_eval(tm: &TangentMap, theta: f64) -> Result<(f64, f64)> {
    check_theta(theta)?;
    Ok(tm.eval(theta))
}

pub fn tangent_derivatives(tm: &TangentMap, theta: f64) -> Result<TangentDerivatives> {
    check_theta(theta)?;
    Ok(tm.derivatives(theta))
}

pub fn tangent_identity_check(tm: &TangentMap, theta: f64) -> Result<IdentityCheck> {
    check_theta(theta)?;
    Ok(tm.identity_check(theta))
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < PI {
        Ok(())
    } else {
        invalid(format!("polar angle must lie in (0, π), got {theta}"))
    }
}

/// Extreme Kerr map `(U, v)` at `(ρ, z)`, with `U = u + ln ρ`.
pub fn kerr_eval(k: &KerrParams, rho: f64, z: f64) -> Result<(f64, f64)> {
    let dz = z - k.center_z;
    if rho == 0.0 && dz == 0.0 {
        return invalid("Kerr map evaluated at its puncture");
    }
    Ok(kerr_eval_unchecked(k, rho, z))
}

pub(crate) fn kerr_eval_unchecked(k: &KerrParams, rho: f64, z: f64) -> (f64, f64) {
    let a = k.a_kerr;
    let dz = z - k.center_z;
    let r = rho.hypot(dz);
    let c = dz / r;
    let s2 = (rho / r).powi(2);
    let big_r = r + a;
    let d = big_r * big_r + a * a * c * c;
    let u = r.ln() - 0.5 * (big_r * big_r + a * a + 2.0 * a.powi(3) * big_r * s2 / d).ln();
    let v = a * a * c * (3.0 - c * c) + a.powi(4) * c * s2 * s2 / d;
    (u, k.sign * v + k.offset)
}

fn check_b(b: f64) -> Result<()> {
    if b.abs() < 1.0 {
        Ok(())
    } else {
        invalid(format!("tangent parameter must lie in (-1, 1), got {b}"))
    }
}

fn denom(b: f64, t: f64) -> f64 {
    let c = t.cos();
    1.0 + c * c + 2.0 * b * c
}

/// `f₃(b) = 4π ∫₀^π sin³θ (cos θ + b)/(1 + cos²θ + 2b cos θ) dθ`.
pub fn f3(b: f64) -> Result<f64> {
    check_b(b)?;
    let v = integrate_default(|t| t.sin().powi(3) * (t.cos() + b) / denom(b, t), 0.0, PI)?;
    Ok(4.0 * PI * v)
}

/// `f₄(b) = −4π ∫₀^π (1 + b cos θ) sin θ cos θ/(1 + cos²θ + 2b cos θ) dθ`.
pub fn f4(b: f64) -> Result<f64> {
    check_b(b)?;
    let v = integrate_default(
        |t| (1.0 + b * t.cos()) * t.sin() * t.cos() / denom(b, t),
        0.0,
        PI,
    )?;
    Ok(-4.0 * PI * v)
}

/// `f = f₃ + f₄`; the energy decays at rate `Σ f(bᵢ) bᵢ` along the flow.
pub fn f(b: f64) -> Result<f64> {
    Ok(f3(b)? + f4(b)?)
}

/// `f₃′(b) = 4π ∫₀^π sin⁵θ / D² dθ`.
pub fn f3_prime(b: f64) -> Result<f64> {
    check_b(b)?;
    let v = integrate_default(|t| t.sin().powi(5) / denom(b, t).powi(2), 0.0, PI)?;
    Ok(4.0 * PI * v)
}

/// `f₄′(b) = 4π ∫₀^π sin³θ cos²θ / D² dθ`.
pub fn f4_prime(b: f64) -> Result<f64> {
    check_b(b)?;
    let v = integrate_default(
        |t| t.sin().powi(3) * t.cos().powi(2) / denom(b, t).powi(2),
        0.0,
        PI,
    )?;
    Ok(4.0 * PI * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tangent_values() {
        let (u, v) = TangentMap::new(0.5, 0.0).unwrap().eval(PI / 2.0);
        assert!(u.abs() < 1e-15 && v.abs() < 1e-15);
        let (u, v) = TangentMap::new(1.0, 0.5).unwrap().eval(PI / 3.0);
        assert_relative_eq!(u, -0.5 * (2.0 * 0.75f64.sqrt() / 1.75).ln(), epsilon = 1e-14);
        assert_relative_eq!(u, 0.005_154_82, epsilon = 1e-8);
        assert_relative_eq!(v, 1.625 / 1.75, epsilon = 1e-14);
        let tm = TangentMap::new(1.3, -0.4).unwrap();
        assert_relative_eq!(tm.eval(1e-9).1, 1.3, epsilon = 1e-12);
        assert_relative_eq!(tm.eval(PI - 1e-9).1, -1.3, epsilon = 1e-12);
    }

    #[test]
    fn theta_derivative_examples() {
        let d = TangentMap::new(1.0, 0.0).unwrap().derivatives(PI / 2.0);
        assert!(d.du_dtheta.abs() < 1e-16);
        let d = TangentMap::new(1.0, 0.5).unwrap().derivatives(PI / 2.0);
        assert_relative_eq!(d.du_dtheta, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn identities() {
        let c = TangentMap::new(1.0, 0.0).unwrap().identity_check(PI / 2.0);
        assert_relative_eq!(c.rhs2, 2.0);
        assert_relative_eq!(c.lhs2, 2.0, epsilon = 1e-14);
        let c = TangentMap::new(0.7, -0.3).unwrap().identity_check(1.1);
        assert_relative_eq!(c.lhs1, c.rhs1, max_relative = 1e-12);
        assert_relative_eq!(c.rhs1, -0.801_480_9, epsilon = 1e-7);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TangentMap::new(1.0, 1.0).is_err());
        assert!(TangentMap::new(0.0, 0.0).is_err());
        assert!(tangent_eval(&TangentMap::new(1.0, 0.0).unwrap(), 0.0).is_err());
        assert!(f3(-1.0).is_err());
        assert!(KerrParams::from_angular_momentum(0.0, 0.0, 0.0).is_err());
        let k = KerrParams::from_angular_momentum(1.0, 0.5, 0.0).unwrap();
        assert!(kerr_eval(&k, 0.0, 0.5).is_err());
    }

    #[test]
    fn sphere_energy_matches_quadrature() {
        for &b in &[0.0, 0.3, -0.7, 0.95] {
            let tm = TangentMap::new(2.0, b).unwrap();
            let q = integrate_default(|t| tm.identity_check(t).rhs2 * t.sin(), 0.0, PI).unwrap();
            assert_relative_eq!(tm.sphere_energy(), q, epsilon = 1e-10);
        }
        assert_relative_eq!(TangentMap::new(1.0, 0.0).unwrap().sphere_energy(), PI, epsilon = 1e-14);
    }

    #[test]
    fn kerr_axis_values() {
        let k = KerrParams::from_angular_momentum(2.0, 1.0, 0.0).unwrap();
        for &r in &[0.01, 1.0, 30.0] {
            assert_relative_eq!(kerr_eval(&k, 0.0, 1.0 + r).unwrap().1, 4.0, epsilon = 1e-13);
            assert_relative_eq!(kerr_eval(&k, 0.0, 1.0 - r).unwrap().1, -4.0, epsilon = 1e-13);
        }
        let neg = KerrParams::from_angular_momentum(-2.0, 1.0, 3.0).unwrap();
        assert_relative_eq!(kerr_eval(&neg, 0.0, 5.0).unwrap().1, -1.0, epsilon = 1e-13);
    }

    #[test]
    fn kerr_tangent_limit_on_equator() {
        let k = KerrParams::from_angular_momentum(1.0, 0.0, 0.0).unwrap();
        let r = 1e-9;
        let (u, _) = kerr_eval(&k, r, 0.0).unwrap();
        assert_relative_eq!(u - r.ln(), -0.5 * 4f64.ln(), epsilon = 1e-8);
        let (ut, _) = k.tangent().eval(PI / 2.0);
        assert_relative_eq!(ut, -0.5 * 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn f_at_zero() {
        assert!(f3(0.0).unwrap().abs() < 1e-10);
        assert!(f4(0.0).unwrap().abs() < 1e-10);
    }
}

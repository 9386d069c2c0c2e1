//! Spherical linearization of the harmonic map equations at a tangent map.
//!
//! Perturbations `(φ₁, φ₂)` of `(ū, v̄)` on the unit sphere, azimuthal mode
//! `m`, P1 elements in θ with the `sin θ dθ` measure. The stiffness form is
//!
//! ```text
//! φ₁'ψ₁' + w φ₂'ψ₂' + 8 w v̄'² φ₁ψ₁ + m²/sin²θ (φ₁ψ₁ + w φ₂ψ₂)
//!   + 2 w v̄' (ψ₁φ₂' − ψ₂φ₁' + φ₁ψ₂' − φ₂ψ₁')
//! ```
//!
//! with `w = e^{4ū}`, and the mass form is `φ₁ψ₁ + w φ₂ψ₂`. The cross term
//! is the symmetric part of `4 w v̄' (ψ₁φ₂' − ψ₂φ₁')`. Its antisymmetric part
//! `2 w v̄' ((ψ₁φ₂)' − (φ₁ψ₂)')` integrates to boundary terms, since
//! `w v̄' sin θ` is constant, and those vanish because `φ₂` is pinned at the
//! poles. [`SpectralProblem::antisymmetric_remainder`] measures it.

use crate::error::{Error, Result};
use crate::kerr::TangentMap;
use crate::quadrature::gauss_legendre;
use faer::{Mat, Side};
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct SpectralProblem {
    pub tangent: TangentMap,
    pub n_theta: usize,
    pub azimuthal_mode: u32,
    /// Nodes `θ_0..θ_n` on `[π/(4n), π − π/(4n)]`.
    pub theta: Vec<f64>,
    /// `e^{4ū}` at the nodes.
    pub weight: Vec<f64>,
    pub stiffness: Mat<f64>,
    pub mass: Mat<f64>,
    antisym: Mat<f64>,
    /// Node index of each `φ₁` and `φ₂` unknown.
    dofs1: Vec<usize>,
    dofs2: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayExponents {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub beta_bar_sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
    /// Eigenvectors at the nodes, zero where pinned; mass-orthonormal.
    pub phi1: Vec<Vec<f64>>,
    pub phi2: Vec<Vec<f64>>,
    pub decay: Vec<Option<DecayExponents>>,
}

/// Assemble the stiffness and mass matrices on `n_theta` elements.
pub fn assemble(tm: &TangentMap, n_theta: usize, m: u32) -> Result<SpectralProblem> {
    if !(tm.b.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("tangent parameter must lie in (-1, 1), got {}", tm.b)));
    }
    if n_theta < 16 {
        return Err(Error::InvalidInput(format!("n_theta must be at least 16, got {n_theta}")));
    }
    let n = n_theta;
    let t_min = std::f64::consts::PI / (4.0 * n as f64);
    let h = (std::f64::consts::PI - 2.0 * t_min) / n as f64;
    let theta: Vec<f64> = (0..=n).map(|i| t_min + h * i as f64).collect();
    let weight: Vec<f64> = theta.iter().map(|&t| tm.weight(t)).collect();

    // φ₂ is pinned at both ends; φ₁ too for m > 0.
    let dofs1: Vec<usize> = if m == 0 { (0..=n).collect() } else { (1..n).collect() };
    let dofs2: Vec<usize> = (1..n).collect();
    let mut map1 = vec![None; n + 1];
    let mut map2 = vec![None; n + 1];
    for (k, &i) in dofs1.iter().enumerate() {
        map1[i] = Some(k);
    }
    for (k, &i) in dofs2.iter().enumerate() {
        map2[i] = Some(dofs1.len() + k);
    }
    let size = dofs1.len() + dofs2.len();
    let mut stiff = Mat::<f64>::zeros(size, size);
    let mut mass = Mat::<f64>::zeros(size, size);
    let mut anti = Mat::<f64>::zeros(size, size);
    let (gx, gw) = gauss_legendre(4);
    let m2 = (m as f64).powi(2);

    for e in 0..n {
        let (t0, t1) = (theta[e], theta[e + 1]);
        for (&x, &wq) in gx.iter().zip(&gw) {
            let t = 0.5 * (t0 + t1) + 0.5 * h * x;
            let s = t.sin();
            let dvol = wq * 0.5 * h * s;
            let w = tm.weight(t);
            let vp = tm.derivatives(t).dv_dtheta;
            let nf = [(t1 - t) / h, (t - t0) / h];
            let dn = [-1.0 / h, 1.0 / h];
            for p in 0..2 {
                for q in 0..2 {
                    // rows test ψ, columns trial φ
                    let (a1, b1) = (map1[e + p], map1[e + q]);
                    let (a2, b2) = (map2[e + p], map2[e + q]);
                    if let (Some(r), Some(c)) = (a1, b1) {
                        stiff[(r, c)] += dvol * (dn[p] * dn[q] + (8.0 * w * vp * vp + m2 / (s * s)) * nf[p] * nf[q]);
                        mass[(r, c)] += dvol * nf[p] * nf[q];
                    }
                    if let (Some(r), Some(c)) = (a2, b2) {
                        stiff[(r, c)] += dvol * w * (dn[p] * dn[q] + m2 / (s * s) * nf[p] * nf[q]);
                        mass[(r, c)] += dvol * w * nf[p] * nf[q];
                    }
                    // ψ₁ = N_p, φ₂ = N_q: symmetric part ψ₁φ₂' − φ₂ψ₁'
                    // and antisymmetric part (ψ₁φ₂)'
                    if let (Some(r), Some(c)) = (a1, b2) {
                        let sym = 2.0 * w * vp * (nf[p] * dn[q] - dn[p] * nf[q]);
                        let asym = 2.0 * w * vp * (nf[p] * dn[q] + dn[p] * nf[q]);
                        stiff[(r, c)] += dvol * sym;
                        stiff[(c, r)] += dvol * sym;
                        anti[(r, c)] += dvol * asym;
                        anti[(c, r)] -= dvol * asym;
                    }
                }
            }
        }
    }
    if mass.llt(Side::Lower).is_err() {
        return Err(Error::LinearAlgebra("spectral mass matrix is not positive definite".into()));
    }
    Ok(SpectralProblem { tangent: *tm, n_theta, azimuthal_mode: m, theta, weight, stiffness: stiff, mass, antisym: anti, dofs1, dofs2 })
}

impl SpectralProblem {
    pub fn dim(&self) -> usize {
        self.dofs1.len() + self.dofs2.len()
    }

    /// Unknown vector from nodal values `(φ₁, φ₂)`; pinned entries are dropped.
    pub fn restrict(&self, phi1: &[f64], phi2: &[f64]) -> Vec<f64> {
        self.dofs1.iter().map(|&i| phi1[i]).chain(self.dofs2.iter().map(|&i| phi2[i])).collect()
    }

    /// Nodal values `(φ₁, φ₂)` of an unknown vector.
    pub fn extend(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.theta.len();
        let (mut p1, mut p2) = (vec![0.0; n], vec![0.0; n]);
        for (k, &i) in self.dofs1.iter().enumerate() {
            p1[i] = x[k];
        }
        for (k, &i) in self.dofs2.iter().enumerate() {
            p2[i] = x[self.dofs1.len() + k];
        }
        (p1, p2)
    }

    fn form(a: &Mat<f64>, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..a.ncols() {
            if y[c] == 0.0 {
                continue;
            }
            let mut col = 0.0;
            for r in 0..a.nrows() {
                col += x[r] * a[(r, c)];
            }
            s += col * y[c];
        }
        s
    }

    /// `ψᵀ K φ`.
    pub fn stiffness_form(&self, psi: &[f64], phi: &[f64]) -> f64 {
        Self::form(&self.stiffness, psi, phi)
    }

    pub fn mass_form(&self, psi: &[f64], phi: &[f64]) -> f64 {
        Self::form(&self.mass, psi, phi)
    }

    /// `ψᵀ A φ` for the antisymmetric part `A` of the cross term.
    pub fn antisymmetric_form(&self, psi: &[f64], phi: &[f64]) -> f64 {
        Self::form(&self.antisym, psi, phi)
    }

    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        self.stiffness_form(x, x) / self.mass_form(x, x)
    }

    /// `‖A‖_F / ‖K‖_F`: how far the as-written cross term is from symmetric
    /// on the discrete space.
    pub fn antisymmetric_remainder(&self) -> f64 {
        self.antisym.norm_l2() / self.stiffness.norm_l2()
    }
}

/// Smallest `k` eigenpairs of `K x = μ M x`.
pub fn eigen(problem: &SpectralProblem, k: usize) -> Result<SpectralResult> {
    let n = problem.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("requested {k} eigenpairs of a problem of size {n}")));
    }
    let llt = problem
        .mass
        .llt(Side::Lower)
        .map_err(|_| Error::LinearAlgebra("spectral mass matrix is not positive definite".into()))?;
    let l = llt.L();
    // C = L⁻¹ K L⁻ᵀ, using the symmetry of K
    let mut x = problem.stiffness.clone();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut c = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let mut y = evd.U().get(.., 0..k).to_owned();
    l.transpose().solve_upper_triangular_in_place(y.as_mut());
    let mut mu = Vec::with_capacity(k);
    let (mut phi1, mut phi2, mut decay) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..k {
        mu.push(s[i]);
        let col: Vec<f64> = (0..n).map(|r| y[(r, i)]).collect();
        let (p1, p2) = problem.extend(&col);
        phi1.push(p1);
        phi2.push(p2);
        // within round-off of a nonnegative spectrum
        decay.push(decay_exponents(s[i].max(0.0)).ok());
    }
    Ok(SpectralResult { mu, theta: problem.theta.clone(), phi1, phi2, decay })
}

/// `λ± = (1 ± √(1+4μ))/2` and the positive root `β̄` of `β² + β = μ`.
pub fn decay_exponents(mu: f64) -> Result<DecayExponents> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidInput(format!("decay exponents need μ ≥ 0, got {mu}")));
    }
    let r = (1.0 + 4.0 * mu).sqrt();
    Ok(DecayExponents { lambda_plus: 0.5 * (1.0 + r), lambda_minus: 0.5 * (1.0 - r), beta_bar_sup: 0.5 * (r - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_default;

    fn tm(b: f64) -> TangentMap {
        TangentMap::new(2.0, b).unwrap()
    }

    #[test]
    fn decay_examples() {
        let d = decay_exponents(0.0).unwrap();
        assert_eq!((d.lambda_plus, d.lambda_minus, d.beta_bar_sup), (1.0, 0.0, 0.0));
        assert_eq!(decay_exponents(2.0).unwrap().beta_bar_sup, 1.0);
        let d = decay_exponents(6.0).unwrap();
        assert_eq!((d.lambda_plus, d.lambda_minus, d.beta_bar_sup), (3.0, -2.0, 2.0));
        assert!(decay_exponents(-1e-9).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(assemble(&tm(0.0), 15, 0).is_err());
        let bad = TangentMap { a: 2.0, b: 1.0 };
        assert!(assemble(&bad, 64, 0).is_err());
    }

    #[test]
    fn weight_blows_up_like_inverse_sin4_at_poles() {
        let t = tm(0.3);
        for &th in &[1e-3, 1e-4] {
            let c = t.weight(th) * th.sin().powi(4);
            // D(0) = 2 + 2b, so the limit is ((2+2b)/(2a√(1−b²)))²
            let lim = ((2.0 + 0.6) / (4.0 * (1.0f64 - 0.09).sqrt())).powi(2);
            assert!((c / lim - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_phi1_form() {
        // w v̄'² = (1−b²) sin²θ / D², so the (1, 0) form is 8(1−b²)∫ sin³θ/D² dθ;
        // for b = 0 this is 8∫(1−c²)/(1+c²)² dc = 8.
        for &b in &[0.0, 0.5] {
            let p = assemble(&tm(b), 256, 0).unwrap();
            let n = p.theta.len();
            let x = p.restrict(&vec![1.0; n], &vec![0.0; n]);
            let got = p.stiffness_form(&x, &x);
            let (lo, hi) = (p.theta[0], p.theta[n - 1]);
            let want = integrate_default(
                |t| {
                    let (c, s) = (t.cos(), t.sin());
                    8.0 * (1.0 - b * b) * s.powi(3) / (1.0 + c * c + 2.0 * b * c).powi(2)
                },
                lo,
                hi,
            )
            .unwrap();
            assert!((got - want).abs() < 1e-9, "b={b}: {got} vs {want}");
            if b == 0.0 {
                assert!((got - 8.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ground_state_is_near_zero_and_simple() {
        let p = assemble(&tm(0.0), 256, 0).unwrap();
        let r = eigen(&p, 4).unwrap();
        assert!(r.mu[0] >= -1e-3 && r.mu[0] <= 1e-2, "{:?}", r.mu);
        assert!(r.mu[1] - r.mu[0] > 1.0);
        // mass-orthonormal and Rayleigh quotients
        let x: Vec<Vec<f64>> = (0..4).map(|i| p.restrict(&r.phi1[i], &r.phi2[i])).collect();
        for i in 0..4 {
            for j in 0..4 {
                let m = p.mass_form(&x[i], &x[j]);
                assert!((m - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
            assert!((p.rayleigh(&x[i]) - r.mu[i]).abs() < 1e-8 * (1.0 + r.mu[i]));
        }
    }

    #[test]
    fn first_eigenvalue_shrinks_quadratically() {
        let mu = |n| eigen(&assemble(&tm(0.0), n, 0).unwrap(), 1).unwrap().mu[0];
        let (a, b) = (mu(64), mu(128));
        assert!(a > 0.0 && b > 0.0);
        let rate = (a / b).log2();
        assert!((rate - 2.0).abs() < 0.3, "rate {rate}");
    }

    #[test]
    fn positive_gap_across_b() {
        for &b in &[-0.5, 0.0, 0.5] {
            let r = eigen(&assemble(&tm(b), 128, 0).unwrap(), 3).unwrap();
            assert!(r.mu.iter().all(|&m| m >= -1e-3));
            assert!(r.mu[1] > 0.5, "b={b}: {:?}", r.mu);
        }
    }

    #[test]
    fn azimuthal_modes_are_stiffer() {
        let m0 = eigen(&assemble(&tm(0.2), 128, 0).unwrap(), 1).unwrap().mu[0];
        let m1 = eigen(&assemble(&tm(0.2), 128, 1).unwrap(), 1).unwrap().mu[0];
        let m2 = eigen(&assemble(&tm(0.2), 128, 2).unwrap(), 1).unwrap().mu[0];
        assert!(m1 >= m0 - 1e-6 && m2 >= m1 - 1e-6, "{m0} {m1} {m2}");
    }

    #[test]
    fn antisymmetric_part_vanishes() {
        let p = assemble(&tm(0.4), 64, 0).unwrap();
        assert!(p.antisymmetric_remainder() < 1e-10, "{}", p.antisymmetric_remainder());
    }
}

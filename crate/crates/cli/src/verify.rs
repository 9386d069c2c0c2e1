//! Quick property suites run by `harmap verify`. Each draws its random
//! samples from a generator seeded by the run seed; tolerances are loose
//! enough that verdicts do not depend on the seed.

use harmap::energy::{defect_report, energy};
use harmap::hyperbolic::{distance, HPoint};
use harmap::kerr::{self, kerr_eval, KerrParams, TangentMap};
use harmap::model::{self, BlendedMap, Constituent};
use harmap::solver::{discretize, solve};
use harmap::spectral;
use harmap::{GridSpec, Puncture, PunctureConfig, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub all_passed: bool,
    pub suites: Vec<SuiteResult>,
}

struct Tally {
    checks: usize,
    failures: usize,
    detail: String,
}

impl Tally {
    fn new() -> Self {
        Self { checks: 0, failures: 0, detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.failures <= 3 {
                if !self.detail.is_empty() {
                    self.detail.push_str("; ");
                }
                self.detail.push_str(&what());
            }
        }
    }
}

type Suite = fn(&mut ChaCha8Rng) -> Tally;

pub fn run(seed: u64, mut progress: impl FnMut(&str, bool)) -> VerifyReport {
    let suites: [(&'static str, Suite); 7] = [
        ("hyperbolic_distance", hyperbolic_distance),
        ("tangent_identities", tangent_identities),
        ("kerr_residual_order", kerr_residual_order),
        ("geometry_lemmas", geometry_lemmas),
        ("model_tension", model_tension),
        ("spectral", spectral_suite),
        ("single_puncture_solve", single_puncture_solve),
    ];
    let mut out = Vec::new();
    for (i, (name, suite)) in suites.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let t = Instant::now();
        let tally = suite(&mut rng);
        let passed = tally.failures == 0 && tally.checks > 0;
        progress(name, passed);
        out.push(SuiteResult {
            name,
            passed,
            checks: tally.checks,
            failures: tally.failures,
            seconds: t.elapsed().as_secs_f64(),
            detail: tally.detail,
        });
    }
    VerifyReport { seed, all_passed: out.iter().all(|s| s.passed), suites: out }
}

fn random_point(rng: &mut ChaCha8Rng) -> HPoint {
    HPoint::new(rng.random_range(-3.0..3.0), rng.random_range(-5.0..5.0))
}

fn hyperbolic_distance(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for _ in 0..2000 {
        let (p, q, r) = (random_point(rng), random_point(rng), random_point(rng));
        let (dpq, dqp) = (distance(p, q), distance(q, p));
        t.check((dpq - dqp).abs() <= 1e-12 * (1.0 + dpq), || format!("asymmetric distance {dpq} vs {dqp}"));
        let (dqr, dpr) = (distance(q, r), distance(p, r));
        t.check(dpr <= dpq + dqr + 1e-9, || format!("triangle inequality fails: {dpr} > {dpq} + {dqr}"));
        // v-translations and the dilation (u, v) → (u + c, e^{−2c} v) are isometries
        let c = rng.random_range(-1.0..1.0);
        let s = rng.random_range(-4.0..4.0);
        let shift = |x: HPoint| HPoint::new(x.u, x.v + s);
        let d1 = distance(shift(p), shift(q));
        let d2 = distance(p.dilate(c), q.dilate(c));
        t.check((d1 - dpq).abs() <= 1e-9 * (1.0 + dpq), || format!("shift changes distance: {d1} vs {dpq}"));
        t.check((d2 - dpq).abs() <= 1e-9 * (1.0 + dpq), || format!("dilation changes distance: {d2} vs {dpq}"));
    }
    t
}

fn tangent_identities(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for _ in 0..2000 {
        let tm = TangentMap::new(rng.random_range(0.1..5.0), rng.random_range(-0.95..0.95)).unwrap();
        let th = rng.random_range(0.01..PI - 0.01);
        let c = tm.identity_check(th);
        t.check((c.lhs1 - c.rhs1).abs() <= 1e-9 * c.rhs1.abs(), || format!("first identity at θ={th}"));
        t.check((c.lhs2 - c.rhs2).abs() <= 1e-9 * c.rhs2.abs(), || format!("second identity at θ={th}"));
    }
    let f3p = 4.0 * PI * (4.0 - PI);
    let f4p = 4.0 * PI * (PI - 3.0);
    t.check(kerr::f3(0.0).unwrap().abs() < 1e-10, || "f3(0) != 0".into());
    t.check(kerr::f4(0.0).unwrap().abs() < 1e-10, || "f4(0) != 0".into());
    t.check((kerr::f3_prime(0.0).unwrap() - f3p).abs() < 1e-6, || "f3'(0) mismatch".into());
    t.check((kerr::f4_prime(0.0).unwrap() - f4p).abs() < 1e-6, || "f4'(0) mismatch".into());
    for i in 1..200 {
        let b = -1.0 + 0.01 * i as f64;
        let fb = kerr::f(b).unwrap();
        t.check(fb * b >= 0.0, || format!("f(b)·b < 0 at b={b}"));
    }
    t
}

/// Observed order of the finite-difference tension of the Kerr map.
pub fn kerr_fd_order(j: f64, rho: f64, z: f64, h: f64) -> f64 {
    let k = KerrParams::from_angular_momentum(j, 0.0, 0.0).unwrap();
    let map = |r: f64, z: f64| kerr_eval(&k, r, z).unwrap();
    let t1 = model::tension_fd(map, rho, z, h);
    let t2 = model::tension_fd(map, rho, z, h / 2.0);
    (t1 / t2).log2()
}

fn kerr_residual_order(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for _ in 0..20 {
        let j = rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let rho = rng.random_range(0.5..3.0);
        let z = rng.random_range(-2.0..2.0);
        let p = kerr_fd_order(j, rho, z, 0.04);
        t.check((p - 2.0).abs() <= 0.3, || format!("order {p:.3} at J={j:.3}, ρ={rho:.3}, z={z:.3}"));
    }
    t
}

fn geometry_lemmas(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let n = 10_000;
    let eta = rng.random_range(0.01..1.0);
    let s: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..20.0 * eta), rng.random_range(-20.0 * eta..20.0 * eta))).collect();
    let r = model::check_ratio_upper_half(eta, &s);
    t.check(r.passed() && r.checked > 0, || format!("upper-half ratio: {r:?}"));
    let z1 = rng.random_range(-2.0..0.0);
    let z2 = z1 + rng.random_range(0.1..2.0);
    let s: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..10.0), rng.random_range(-8.0..8.0))).collect();
    let r = model::check_ratio_two_sided(z1, z2, &s);
    t.check(r.passed() && r.checked > 0, || format!("two-sided ratio: {r:?}"));
    let delta = 12.0 * 0.25 * (z2 - z1) * rng.random_range(1.0..3.0);
    let r = model::check_log_average(z1, z2, delta, rng.random_range(0.0..1.0), &s);
    t.check(r.passed() && r.checked > 0, || format!("log average: {r:?}"));
    t
}

/// Blend of two `J = 1` Kerr maps at `±η` into the `J = 2` map, with
/// rod values from the symmetric gauge.
pub fn collision_blend(eta: f64, delta: f64) -> BlendedMap {
    let k1 = KerrParams::from_angular_momentum(1.0, -eta, -2.0).unwrap();
    let k2 = KerrParams::from_angular_momentum(1.0, eta, 2.0).unwrap();
    let far = Constituent::Kerr(KerrParams::from_angular_momentum(2.0, 0.0, 0.0).unwrap());
    BlendedMap::two_puncture(k1, k2, far, delta).unwrap()
}

/// `max/min` of `r²|τ|` over `r ∈ [r0, 10 r0]` at polar angle `theta`.
pub fn tension_variation(map: &BlendedMap, r0: f64, theta: f64) -> f64 {
    let vals: Vec<f64> = (0..=20)
        .map(|i| {
            let r = r0 * 10f64.powf(i as f64 / 20.0);
            r * r * map.tension(r * theta.sin(), r * theta.cos()).unwrap()
        })
        .collect();
    let max = vals.iter().cloned().fold(0.0, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn model_tension(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let map = collision_blend(1e-3, 0.4);
    for _ in 0..5 {
        let theta = rng.random_range(0.3 * PI..0.7 * PI);
        let v = tension_variation(&map, 0.01, theta);
        t.check(v < 3.0, || format!("r²|τ| varies by {v:.2} at θ={theta:.3}"));
    }
    // single constituent near the axis above the pair: tension is FD error only
    let (rho, z) = (0.02, 0.08);
    let f = |r: f64, z: f64| map.eval(r, z);
    let p = (model::tension_fd(f, rho, z, 1e-3) / model::tension_fd(f, rho, z, 5e-4)).log2();
    t.check((p - 2.0).abs() < 0.3, || format!("single-constituent order {p:.3}"));
    t
}

fn spectral_suite(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let b = rng.random_range(-0.5..0.5);
    for &bb in &[0.0, b] {
        let p = spectral::assemble(&TangentMap::new(2.0, bb).unwrap(), 128, 0).unwrap();
        let r = spectral::eigen(&p, 3).unwrap();
        t.check((-1e-3..=1e-2).contains(&r.mu[0]), || format!("μ₁ = {} at b={bb}", r.mu[0]));
        t.check(r.mu[1] > 0.5, || format!("μ₂ = {} at b={bb}", r.mu[1]));
        let d = spectral::decay_exponents(r.mu[1]).unwrap();
        let lhs = d.beta_bar_sup * d.beta_bar_sup + d.beta_bar_sup;
        t.check((lhs - r.mu[1]).abs() <= 1e-12 * r.mu[1], || "decay identity".into());
        t.check(p.antisymmetric_remainder() < 1e-10, || "antisymmetric remainder".into());
    }
    t
}

fn single_puncture_solve(_: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let cfg = PunctureConfig::new(vec![Puncture::new(0.0, 1.0)]).unwrap();
    let spec = GridSpec::graded(0.0, 10.0, 64, 128, 0.1, 0.01);
    let res = discretize(&cfg, &spec).and_then(|d| solve(Arc::new(d), &SolverOptions::default()));
    match res {
        Ok(f) => {
            let e = energy(&f).unwrap();
            t.check((e.mass_bound - 1.0).abs() < 0.05, || format!("E/8π = {}", e.mass_bound));
            t.check(f.b[0].abs() < 0.02, || format!("b = {}", f.b[0]));
            let d = defect_report(&f).unwrap();
            t.check(d.consistency < 0.05, || format!("fit and defect disagree by {}", d.consistency));
        }
        Err(e) => t.check(false, || format!("solve failed: {e}")),
    }
    t
}

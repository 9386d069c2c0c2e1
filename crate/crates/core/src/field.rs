//! Discrete maps `(U, v)` on a half-plane grid.

use crate::grid::{Grid, GridSpec};
use crate::puncture::PunctureConfig;
use crate::solver::{self, Discretization};
use std::io::{self, Write};
use std::sync::Arc;

/// Nodal values of `U = u + ln ρ` and `v`, with the tangent parameters
/// imposed on the excision circles.
#[derive(Clone, Debug)]
pub struct MapField {
    disc: Arc<Discretization>,
    pub big_u: Vec<f64>,
    pub v: Vec<f64>,
    /// Tangent parameter of each puncture used for the excision data.
    pub b: Vec<f64>,
    /// Tolerance the field was solved to; `None` for sampled fields.
    pub(crate) tol: Option<f64>,
    pub(crate) max_residual: f64,
    pub newton_iters: usize,
    pub b_iters: usize,
}

impl MapField {
    pub(crate) fn new(disc: Arc<Discretization>, big_u: Vec<f64>, v: Vec<f64>, b: Vec<f64>) -> Self {
        let mut f = Self { disc, big_u, v, b, tol: None, max_residual: f64::INFINITY, newton_iters: 0, b_iters: 0 };
        let (ru, rv) = solver::residual(&f);
        f.max_residual = max_abs(&ru).max(max_abs(&rv));
        f
    }

    /// Sample a closed-form map at every node. The boundary data of the
    /// discretization are imposed afterwards, with tangent parameters `b`.
    pub fn from_fn(disc: Arc<Discretization>, b: Vec<f64>, map: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let g = disc.grid();
        let (mut u, mut v): (Vec<f64>, Vec<f64>) = (0..g.len()).map(|k| {
            let (r, z) = g.coords(k);
            map(r, z)
        }).unzip();
        disc.apply_boundary(&mut u, &mut v, &b);
        Self::new(disc, u, v, b)
    }

    pub fn disc(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn grid(&self) -> &Grid {
        self.disc.grid()
    }

    pub fn spec(&self) -> &GridSpec {
        self.disc.spec()
    }

    pub fn config(&self) -> &PunctureConfig {
        self.disc.config()
    }

    /// Max-norm of both residuals at the free nodes.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn is_solved(&self) -> bool {
        self.tol.is_some_and(|t| self.max_residual <= t)
    }

    /// CSV dump `rho,z,U,v,res_U,res_v`, rows ordered by `z` then `ρ`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (ru, rv) = solver::residual(self);
        writeln!(w, "rho,z,U,v,res_U,res_v")?;
        let g = self.grid();
        for k in 0..g.len() {
            let (r, z) = g.coords(k);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt17(r),
                fmt17(z),
                fmt17(self.big_u[k]),
                fmt17(self.v[k]),
                fmt17(ru[k]),
                fmt17(rv[k])
            )?;
        }
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip a double.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &a| if a.is_nan() { f64::INFINITY } else { m.max(a.abs()) })
}

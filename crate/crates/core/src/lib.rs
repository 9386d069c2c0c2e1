//! Axisymmetric harmonic maps from `ℝ³` minus axis punctures into the
//! hyperbolic plane: closed-form Kerr and tangent maps, a half-plane
//! solver, energies and angle defects, the puncture flow, and the
//! spectrum of the linearized operator at a tangent map.

pub mod energy;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod hyperbolic;
pub mod interp;
pub mod kerr;
pub mod model;
pub mod puncture;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use field::MapField;
pub use grid::{Grid, GridSpec};
pub use kerr::{KerrParams, TangentMap};
pub use puncture::{Puncture, PunctureConfig};
pub use solver::{Discretization, SolverOptions};

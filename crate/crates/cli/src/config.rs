use harmap::flow::FlowOptions;
use harmap::{GridSpec, Puncture, PunctureConfig, SolverOptions};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub punctures: Vec<Puncture>,
    /// Shift added to every rod value of `v`.
    #[serde(default)]
    pub gauge: f64,
    /// Defaults to a graded grid of half-width 40 around the punctures,
    /// 128 nodes in ρ and at least 256 in z.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub flow: FlowOptions,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub n_theta: usize,
    /// Azimuthal modes to solve.
    pub modes: Vec<u32>,
    pub b_list: Vec<f64>,
    /// Tangent scale `a`.
    pub a: f64,
    /// Eigenvalues per row.
    pub k: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { n_theta: 256, modes: vec![0], b_list: vec![0.0], a: 2.0, k: 4 }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError(format!("malformed config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let punctures = self.punctures()?;
        let grid = self.grid_spec();
        grid.validate().map_err(|e| ConfigError(e.to_string()))?;
        harmap::Grid::build(&grid, &punctures, None).map_err(|e| ConfigError(e.to_string()))?;
        self.solver.validate().map_err(|e| ConfigError(e.to_string()))?;
        let f = &self.flow;
        if !(f.t_max > 0.0) {
            return err("flow.t_max must be positive".into());
        }
        if f.dt.is_some_and(|dt| !(dt > 0.0)) {
            return err("flow.dt must be positive".into());
        }
        if f.collision_gap.is_some_and(|g| !(g > 0.0)) || f.scatter_gap.is_some_and(|g| !(g > 0.0)) {
            return err("flow event gaps must be positive".into());
        }
        if !(f.stagnation_tol >= 0.0) {
            return err("flow.stagnation_tol must be nonnegative".into());
        }
        let s = &self.spectral;
        if s.n_theta < 16 {
            return err(format!("spectral.n_theta must be at least 16, got {}", s.n_theta));
        }
        if !(s.a > 0.0 && s.a.is_finite()) {
            return err("spectral.a must be positive".into());
        }
        if s.k < 2 {
            return err("spectral.k must be at least 2".into());
        }
        if let Some(b) = s.b_list.iter().find(|b| !(b.abs() < 1.0)) {
            return err(format!("spectral b = {b} is outside (-1, 1)"));
        }
        Ok(())
    }

    pub fn punctures(&self) -> Result<PunctureConfig, ConfigError> {
        PunctureConfig::with_gauge(self.punctures.clone(), self.gauge).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.clone().unwrap_or_else(|| {
            let config = PunctureConfig::new(self.punctures.clone()).ok();
            let center = config.as_ref().map_or(0.0, |c| c.center());
            let spec = |n_z| GridSpec::graded(center, 40.0, 128, n_z, 0.04, 0.006);
            // each extra anchor needs its own share of fine z nodes
            let Some(config) = config else { return spec(256) };
            (256..=2048)
                .step_by(64)
                .map(spec)
                .find(|s| harmap::Grid::build(s, &config, None).is_ok())
                .unwrap_or_else(|| spec(256))
        })
    }
}

//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use ahcc_core::constraint::SourceRecipe;
use ahcc_core::solver::SolverConfig;
use ahcc_core::verify::BatteryTolerances;
use ahcc_core::{BackgroundGeometry, FdOrder, FieldGrid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Points per axis; odd. Defaults to 33 for n = 3 and 25 for n = 4.
    pub points: Option<usize>,
    pub r_max: f64,
    pub fd_order: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points: None,
            r_max: 0.9,
            fd_order: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Directory holding `hbar.ahcf` and `xibar.ahcf` (for `verify`).
    pub state: Option<PathBuf>,
    pub tolerances: BatteryTolerances,
    pub bianchi_tol: f64,
    pub gauge_identity_tol: f64,
    pub probe_trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            state: None,
            tolerances: BatteryTolerances::default(),
            bianchi_tol: 1e-3,
            gauge_identity_tol: 1e-3,
            probe_trials: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LincheckConfig {
    pub directions: usize,
    pub step: f64,
    pub formula_tol: f64,
    pub tangent_tol: f64,
    pub manufactured_tol: f64,
}

impl Default for LincheckConfig {
    fn default() -> Self {
        LincheckConfig {
            directions: 5,
            step: 1e-4,
            formula_tol: 1e-3,
            tangent_tol: 1e-6,
            manufactured_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Spatial dimension.
    pub n: usize,
    /// Seed of the randomized checks; the source has its own seed.
    pub seed: u64,
    pub grid: GridConfig,
    pub source: SourceRecipe,
    pub solver: SolverConfig,
    pub verify: VerifyConfig,
    pub lincheck: LincheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 3,
            seed: 7,
            grid: GridConfig::default(),
            source: SourceRecipe::default(),
            solver: SolverConfig::default(),
            verify: VerifyConfig::default(),
            lincheck: LincheckConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config document; relative state paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        if let Some(state) = cfg.verify.state.as_mut() {
            if state.is_relative() {
                *state = base.join(&*state);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn points(&self) -> usize {
        self.grid.points.unwrap_or(if self.n >= 4 { 25 } else { 33 })
    }

    /// Checks every field before any computation; returns warnings.
    pub fn validate(&self) -> Result<Vec<String>, CliError> {
        let mut warnings = Vec::new();
        self.build_grid()?;
        self.solver.validate()?;
        let s = self.solver.s;
        let top = self.n as f64 - 1.0;
        if !(s > 0.0 && s < top) {
            warnings.push(format!("solver.s = {s} lies outside the isomorphism range (0, {top})"));
        }
        let src = &self.source;
        if !(src.amplitude >= 0.0 && src.amplitude.is_finite()) {
            return Err(CliError::Validation(format!("source.amplitude: {} must be finite and >= 0", src.amplitude)));
        }
        if !src.decay.is_finite() {
            return Err(CliError::Validation("source.decay: must be finite".into()));
        }
        let lc = &self.lincheck;
        if lc.directions == 0 {
            return Err(CliError::Validation("lincheck.directions: must be at least 1".into()));
        }
        if !(lc.step > 0.0 && lc.step.is_finite()) {
            return Err(CliError::Validation(format!("lincheck.step: {} must be positive", lc.step)));
        }
        if self.verify.probe_trials == 0 {
            return Err(CliError::Validation("verify.probe_trials: must be at least 1".into()));
        }
        Ok(warnings)
    }

    pub fn build_grid(&self) -> Result<FieldGrid, CliError> {
        let order = FdOrder::from_int(self.grid.fd_order)?;
        Ok(FieldGrid::build(self.n, self.points(), self.grid.r_max, order)?)
    }

    pub fn background(&self) -> Result<BackgroundGeometry, CliError> {
        Ok(BackgroundGeometry::new(self.n)?)
    }
}

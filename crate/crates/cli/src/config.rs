//! TOML run configuration.
//!
//! ```toml
//! s_values = [1.0, 2.0, 3.0]
//! refine_minimum = true
//!
//! [scenario]
//! n_param = 6.0
//! cutoff = 0.5
//!
//! [grid]
//! a_min = 1e-3
//! a_max = 100.0
//! points = 40
//! # values = [0.01, 0.1, 1.0]   explicit grid, replaces a_min/a_max/points
//!
//! [quadrature]
//! rel_tol = 1e-8
//!
//! [output]
//! dir = "out"
//! bounds = true
//! ```
//!
//! Every table rejects unknown keys. Command-line flags override file values.

use std::path::{Path, PathBuf};

use horizon::modes::WavePacketSpec;
use horizon::overlap::ScenarioInputs;
use horizon::quadrature::QuadratureConfig;
use horizon::sweep::{log_grid, SweepConfig, DEFAULT_A_MAX, DEFAULT_A_MIN, DEFAULT_GRID_POINTS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub s_values: Vec<f64>,
    pub refine_minimum: bool,
    pub scenario: ScenarioSection,
    pub grid: GridSection,
    pub quadrature: QuadratureSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            s_values: vec![1.0, 2.0, 3.0],
            refine_minimum: true,
            scenario: ScenarioSection::default(),
            grid: GridSection::default(),
            quadrature: QuadratureSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub n_param: f64,
    pub cutoff: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { n_param: WavePacketSpec::DEFAULT_N, cutoff: WavePacketSpec::DEFAULT_CUTOFF }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub a_min: f64,
    pub a_max: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { a_min: DEFAULT_A_MIN, a_max: DEFAULT_A_MAX, points: DEFAULT_GRID_POINTS, values: None }
    }
}

impl GridSection {
    pub fn accelerations(&self) -> Result<Vec<f64>, String> {
        if let Some(v) = &self.values {
            return Ok(v.clone());
        }
        if !(self.a_min > 0.0 && self.a_min < self.a_max && self.a_max.is_finite()) {
            return Err(format!("grid: need 0 < a_min < a_max, got a_min = {}, a_max = {}", self.a_min, self.a_max));
        }
        if self.points < 2 {
            return Err(format!("grid: points must be at least 2, got {}", self.points));
        }
        Ok(log_grid(self.a_min, self.a_max, self.points))
    }
}

/// Overrides applied on top of the default overlap tolerances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillation_panels_per_period: Option<usize>,
}

impl QuadratureSection {
    pub fn resolve(&self) -> QuadratureConfig {
        let mut q = ScenarioInputs::default_quadrature();
        if let Some(v) = self.rel_tol {
            q.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            q.abs_tol = v;
        }
        if let Some(v) = self.max_evaluations {
            q.max_evaluations = v;
        }
        if let Some(v) = self.oscillation_panels_per_period {
            q.oscillation_panels_per_period = v;
        }
        q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Draw the error-probability bounds next to `F`.
    pub bounds: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), bounds: true }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Parses TOML; errors carry the line, column and offending key.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e: toml::de::Error| e.to_string().trim_end().to_string())
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, String> {
        let cfg = SweepConfig {
            a_grid: self.grid.accelerations()?,
            s_values: self.s_values.clone(),
            n_param: self.scenario.n_param,
            cutoff: self.scenario.cutoff,
            quad_cfg: self.quadrature.resolve(),
            refine_minimum: self.refine_minimum,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

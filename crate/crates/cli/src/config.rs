//! Experiment configuration: one TOML file, schema-validated, unknown keys
//! rejected. The resolved configuration is embedded verbatim in every JSON
//! summary so runs are reproducible from their own reports.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use gmcf::geometry::{make_base, BaseGeometry, GeometryKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub geometry: GeometrySection,
    pub run: RunSection,
    pub probes: ProbeSection,
    pub kernel_bounds: KernelBoundsSection,
    pub contraction: ContractionSection,
    pub perturbation: PerturbationSection,
    pub oracle_compare: OracleCompareSection,
    pub output: OutputSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            geometry: GeometrySection::default(),
            run: RunSection::default(),
            probes: ProbeSection::default(),
            kernel_bounds: KernelBoundsSection::default(),
            contraction: ContractionSection::default(),
            perturbation: PerturbationSection::default(),
            oracle_compare: OracleCompareSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub kind: GeometryKind,
    pub radius_or_period: f64,
    pub grid: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            kind: GeometryKind::Circle,
            radius_or_period: 1.0,
            grid: 128,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub horizon: f64,
    /// time-grid intervals of stored histories
    pub intervals: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// worker threads for the experiment pool; 0 = library default
    pub workers: usize,
    /// contraction-ball radius for production solves; 0 = half the
    /// graph-validity threshold
    pub delta: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            horizon: 0.05,
            intervals: 128,
            tolerance: 1e-9,
            max_iterations: 60,
            seed: 42,
            workers: 0,
            delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// sources for the operator-norm fit
    pub count: usize,
    /// draws for the nonlinearity-constant fit
    pub quadratic_samples: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            count: 20,
            quadratic_samples: 24,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelBoundsSection {
    pub d_gauss: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    /// sharp-constant control; must fail at derivative orders >= 1
    pub control_d: f64,
}

impl Default for KernelBoundsSection {
    fn default() -> Self {
        Self {
            d_gauss: 2.0,
            gap_min: 1e-3,
            gap_max: 0.25,
            control_d: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionSection {
    pub pairs: usize,
}

impl Default for ContractionSection {
    fn default() -> Self {
        Self { pairs: 50 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSection {
    pub amplitudes: Vec<f64>,
    pub mode: usize,
    /// admissibility threshold override; 0 = recipe from fitted constants
    pub smallness: f64,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            amplitudes: vec![1e-3, 1e-2],
            mode: 3,
            smallness: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleCompareSection {
    pub random_cases: usize,
    pub fd_steps_multiplier: usize,
}

impl Default for OracleCompareSection {
    fn default() -> Self {
        Self {
            random_cases: 5,
            fd_steps_multiplier: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// carries toml's span-annotated message (line/column included)
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config not readable: {e}"),
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Invalid(m) => write!(f, "config invalid: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        let cfg: Config = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.horizon <= 0.0 {
            return Err(ConfigError::Invalid("run.horizon must be positive".into()));
        }
        if self.run.intervals < 8 {
            return Err(ConfigError::Invalid(
                "run.intervals must be at least 8".into(),
            ));
        }
        if self.geometry.radius_or_period <= 0.0 {
            return Err(ConfigError::Invalid(
                "geometry.radius_or_period must be positive".into(),
            ));
        }
        if self.kernel_bounds.gap_min <= 0.0
            || self.kernel_bounds.gap_min >= self.kernel_bounds.gap_max
        {
            return Err(ConfigError::Invalid(
                "kernel_bounds gaps must satisfy 0 < gap_min < gap_max".into(),
            ));
        }
        if self.kernel_bounds.d_gauss < 1.0 || self.kernel_bounds.control_d < 1.0 {
            return Err(ConfigError::Invalid(
                "gaussian bound constants need D >= 1".into(),
            ));
        }
        if self.perturbation.amplitudes.is_empty() {
            return Err(ConfigError::Invalid(
                "perturbation.amplitudes must not be empty".into(),
            ));
        }
        Ok(())
    }

    pub fn build_geometry(&self) -> Result<Arc<BaseGeometry<f64>>, ConfigError> {
        make_base(
            self.geometry.kind,
            self.geometry.kind.dimension(),
            self.geometry.radius_or_period,
            self.geometry.grid,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Production ball radius: configured value or half the graph-validity
    /// threshold.
    pub fn run_delta(&self, geom: &BaseGeometry<f64>) -> f64 {
        if self.run.delta > 0.0 {
            self.run.delta
        } else {
            0.5 * geom.graph_threshold()
        }
    }
}

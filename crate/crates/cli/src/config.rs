//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use parametrix::assumptions::AssumptionConfig;
use parametrix::catalog::{example_catalog, CoefficientSpec};
use parametrix::coefficients::{CoefficientSet, DriftParameters};
use parametrix::engine::EngineConfig;
use parametrix::oracles::SuiteConfig;

pub const DEFAULT_SEED: u64 = 20_261_019;

/// Builtin coefficient set or a piecewise definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    #[serde(default)]
    pub catalog: Option<String>,
    #[serde(default)]
    pub custom: Option<CoefficientSpec>,
}

/// `"auto"` (midpoint of the window) or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eps0 {
    Value(f64),
    Word(AutoWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

impl Default for Eps0 {
    fn default() -> Self {
        Eps0::Word(AutoWord::Auto)
    }
}

impl Eps0 {
    pub fn value(self) -> Option<f64> {
        match self {
            Eps0::Value(v) => Some(v),
            Eps0::Word(_) => None,
        }
    }
}

/// Slice of the tables for plotting; an empty slice echoes every row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    pub t: Option<f64>,
    pub x: Option<f64>,
}

/// Monte-Carlo overlay of the frozen operator; `paths = 0` turns it off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub paths: usize,
    pub cutoff: f64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self { paths: 0, cutoff: 1e-3 }
    }
}

/// Repetitions of the timed kernels in `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub density_points: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { density_points: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coefficients: CoefficientSection,
    /// Overrides the drift parameters of a catalog entry; required for custom sets.
    #[serde(default)]
    pub drift: Option<DriftParameters>,
    #[serde(default)]
    pub eps0: Eps0,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub assumptions: AssumptionConfig,
    #[serde(default)]
    pub verify: SuiteConfig,
    #[serde(default)]
    pub export: ExportSection,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Allows `t_max` beyond the reference horizon `1/h(1)`.
    #[serde(default)]
    pub compose: bool,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Usage or configuration problem (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        if cfg.engine.eps0.is_some() {
            return Err(ConfigError("set eps0 at the top level, not in [engine]".into()));
        }
        cfg.engine.eps0 = cfg.eps0.value();
        cfg.engine.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    /// Coefficient set and the drift parameters in force.
    pub fn coefficients(&self) -> Result<(CoefficientSet, DriftParameters), ConfigError> {
        let c = &self.coefficients;
        let (set, params) = match (&c.catalog, &c.custom) {
            (Some(name), None) => example_catalog(name).map_err(|e| ConfigError(e.to_string()))?,
            (None, Some(spec)) => {
                let set = spec.build().map_err(|e| ConfigError(e.to_string()))?;
                let params = self
                    .drift
                    .clone()
                    .ok_or_else(|| ConfigError("a custom coefficient set needs a [drift] section".into()))?;
                (set, params)
            }
            _ => return Err(ConfigError("[coefficients] needs exactly one of `catalog` or `custom`".into())),
        };
        let params = self.drift.clone().unwrap_or(params);
        if set.dim() != 1 {
            return Err(ConfigError(format!("`{}` is {}-dimensional; the table engine is one-dimensional", set.name, set.dim())));
        }
        let t0 = set.profile.t0().map_err(|e| ConfigError(e.to_string()))?;
        if self.engine.t_max > t0 * (1.0 + 1e-12) && !self.compose {
            return Err(ConfigError(format!(
                "t_max = {} exceeds the reference horizon 1/h(1) = {t0:.6}; set compose = true to allow it",
                self.engine.t_max
            )));
        }
        Ok((set, params))
    }

    pub fn out_dir(&self, over: Option<&Path>) -> PathBuf {
        over.map(Path::to_path_buf).unwrap_or_else(|| self.output.clone())
    }
}

//! JSON run configuration.
//!
//! Strict schema: unknown keys are rejected, and parse errors name the
//! offending key path. The resolved config (after flag overrides) is echoed
//! into every report so runs are self-describing and reproducible.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use mp_core::TestFunction;

use crate::ensemble::{EnsembleSpec, EntryDist, Truncation};
use crate::fluct_mc::Centering;
use crate::{LabError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub rows: usize,
    pub cols: usize,
    pub field: mp_core::EntryField,
    pub entry: EntryDist,
    #[serde(default)]
    pub truncation: Option<Truncation>,
}

impl EnsembleConfig {
    pub fn with_seed(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            rows: self.rows,
            cols: self.cols,
            field: self.field,
            entry: self.entry.clone(),
            truncation: self.truncation,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub re: f64,
    pub im: f64,
}

impl From<PointConfig> for Complex64 {
    fn from(p: PointConfig) -> Self {
        Complex64::new(p.re, p.im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    /// 1-based index pairs `(i, j)` with `i <= j`.
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    /// Resolvent-field evaluation points.
    #[serde(default)]
    pub points: Vec<PointConfig>,
    /// Corner size for the resolvent field.
    #[serde(default = "default_corner")]
    pub corner: usize,
}

fn default_corner() -> usize {
    2
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceTestConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_variance_band")]
    pub rel_band: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianFitConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_min_p")]
    pub min_p: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependenceConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovBlocksConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_cov_band")]
    pub rel_band: f64,
}

fn default_true() -> bool {
    true
}
fn default_variance_band() -> f64 {
    0.1
}
fn default_min_p() -> f64 {
    0.01
}
fn default_threshold() -> f64 {
    0.1
}
fn default_cov_band() -> f64 {
    0.15
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestsConfig {
    #[serde(default = "default_variance_cfg")]
    pub variance: VarianceTestConfig,
    #[serde(default = "default_fit_cfg")]
    pub gaussian_fit: GaussianFitConfig,
    #[serde(default = "default_indep_cfg")]
    pub independence: IndependenceConfig,
    #[serde(default = "default_cov_cfg")]
    pub covariance_blocks: CovBlocksConfig,
}

fn default_variance_cfg() -> VarianceTestConfig {
    VarianceTestConfig {
        enabled: true,
        rel_band: default_variance_band(),
    }
}
fn default_fit_cfg() -> GaussianFitConfig {
    GaussianFitConfig {
        enabled: true,
        min_p: default_min_p(),
    }
}
fn default_indep_cfg() -> IndependenceConfig {
    IndependenceConfig {
        enabled: true,
        threshold: default_threshold(),
    }
}
fn default_cov_cfg() -> CovBlocksConfig {
    CovBlocksConfig {
        enabled: true,
        rel_band: default_cov_band(),
    }
}

impl Default for TestsConfig {
    fn default() -> Self {
        TestsConfig {
            variance: default_variance_cfg(),
            gaussian_fit: default_fit_cfg(),
            independence: default_indep_cfg(),
            covariance_blocks: default_cov_cfg(),
        }
    }
}

/// Deliberate prediction distortions for negative-control runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Replace the entry law's fourth cumulant in predictions.
    #[serde(default)]
    pub kappa4: Option<f64>,
    /// Replace the predicted per-pair total variance outright.
    #[serde(default)]
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Json, ReportFormat::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

/// Complete description of one laboratory run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Master seed; drawn from system entropy (and echoed) when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    pub trials: usize,
    pub ensemble: EnsembleConfig,
    pub function: TestFunction,
    #[serde(default)]
    pub targets: Targets,
    #[serde(default)]
    pub centering: Centering,
    #[serde(default)]
    pub tests: TestsConfig,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(LabError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.trials == 0 {
            return Err(LabError::Config("trials must be positive".into()));
        }
        if self.ensemble.rows == 0 || self.ensemble.cols == 0 {
            return Err(LabError::Config("ensemble dimensions must be positive".into()));
        }
        self.ensemble.entry.validate()?;
        for pr in &self.targets.pairs {
            if pr[0] == 0 || pr[1] == 0 {
                return Err(LabError::Config(format!(
                    "pairs are 1-based; got ({}, {})",
                    pr[0], pr[1]
                )));
            }
            if pr[0] > pr[1] {
                return Err(LabError::Config(format!(
                    "pair ({}, {}) must have i <= j",
                    pr[0], pr[1]
                )));
            }
        }
        Ok(())
    }

    /// 0-based pairs for the harness.
    pub fn zero_based_pairs(&self) -> Vec<(usize, usize)> {
        self.targets
            .pairs
            .iter()
            .map(|p| (p[0] - 1, p[1] - 1))
            .collect()
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.targets.points.iter().map(|&p| p.into()).collect()
    }
}

/// Parse a config file, naming the offending key on failure.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parse config text (exposed for tests).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        LabError::Config(format!("config key `{}`: {}", e.path(), e.inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

//! JSON configuration for the command line and the studies.
//!
//! Every field has a default, so `{}` is a valid config for every command
//! except `simulate`, which needs a `truth` block. Unknown fields are
//! rejected.

use std::path::{Path, PathBuf};

use fracbayes_core::{Error as CoreError, FractionalOrder, GridSpec, PriorSpec, SeriesConfig, SirConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_json;

/// Parameters a dataset is simulated from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub alpha: f64,
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Truth {
    pub fn validate(&self) -> Result<()> {
        FractionalOrder::new(self.alpha)
            .map_err(|_| CoreError::InvalidConfig { field: "truth.alpha", reason: "must lie in (0, 1]" })?;
        check_sigma(self.sigma, "truth.sigma")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub draws_per_sample: usize,
    pub seed: u64,
    /// Values of `x` to hold fixed; first, middle and last grid level if absent.
    pub x_slices: Option<Vec<f64>>,
    pub t_slices: Option<Vec<f64>>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig { draws_per_sample: 10, seed: 0, x_slices: None, t_slices: None }
    }
}

/// Where artifacts go when no flag says otherwise.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub data: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
    pub intervals: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub prior: PriorSpec,
    pub sir: SirConfig,
    pub series: SeriesConfig,
    pub truth: Option<Truth>,
    pub predict: PredictConfig,
    pub outputs: OutputPaths,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.prior.validate()?;
        self.sir.validate()?;
        self.series.validate()?;
        if let Some(truth) = &self.truth {
            truth.validate()?;
        }
        if self.predict.draws_per_sample == 0 {
            return Err(CoreError::InvalidConfig { field: "predict.draws_per_sample", reason: "must be at least 1" }.into());
        }
        Ok(())
    }
}

fn default_alphas() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn default_sigmas() -> Vec<f64> {
    vec![0.01, 0.1, 0.25]
}

fn check_sigma(sigma: f64, field: &'static str) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(CoreError::InvalidConfig { field, reason: "must be positive and finite" }.into())
    }
}

fn check_alphas(alphas: &[f64], field: &'static str) -> Result<()> {
    if alphas.is_empty() {
        return Err(CoreError::InvalidConfig { field, reason: "must not be empty" }.into());
    }
    if alphas.iter().all(|&a| a > 0.0 && a < 1.0) {
        Ok(())
    } else {
        Err(CoreError::InvalidConfig { field, reason: "every value must lie in (0, 1)" }.into())
    }
}

fn check_sigmas(sigmas: &[f64], field: &'static str) -> Result<()> {
    if sigmas.is_empty() {
        return Err(CoreError::InvalidConfig { field, reason: "must not be empty" }.into());
    }
    sigmas.iter().try_for_each(|&s| check_sigma(s, field))
}

fn check_fit(sir: &SirConfig, grid: &GridSpec, series: &SeriesConfig) -> Result<()> {
    sir.validate()?;
    grid.validate()?;
    series.validate()?;
    Ok(())
}

/// One fit per `(alpha, sigma)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub base_seed: u64,
    /// `sir.seed` is replaced by a per-cell seed.
    pub sir: SirConfig,
    pub prior: PriorSpec,
    pub grid: GridSpec,
    pub series: SeriesConfig,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            alphas: default_alphas(),
            sigmas: default_sigmas(),
            base_seed: 0,
            sir: SirConfig::default(),
            prior: PriorSpec::default(),
            grid: GridSpec::default(),
            series: SeriesConfig::default(),
        }
    }
}

impl RobustnessConfig {
    pub fn validate(&self) -> Result<()> {
        check_alphas(&self.alphas, "alphas")?;
        check_sigmas(&self.sigmas, "sigmas")?;
        self.prior.validate()?;
        check_fit(&self.sir, &self.grid, &self.series)
    }
}

/// One shared dataset, one fit per symmetric `Beta(s, s)` prior on alpha.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSensitivityConfig {
    pub shape_values: Vec<f64>,
    pub alpha_true: f64,
    pub sigma_true: f64,
    pub base_seed: u64,
    /// `sir.seed` is replaced by a seed derived from `base_seed`.
    pub sir: SirConfig,
    pub grid: GridSpec,
    pub series: SeriesConfig,
}

impl Default for PriorSensitivityConfig {
    fn default() -> Self {
        PriorSensitivityConfig {
            shape_values: vec![1.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            alpha_true: 0.82,
            sigma_true: 0.1,
            base_seed: 0,
            sir: SirConfig::default(),
            grid: GridSpec::default(),
            series: SeriesConfig::default(),
        }
    }
}

impl PriorSensitivityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shape_values.is_empty() || !self.shape_values.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(CoreError::InvalidConfig { field: "shape_values", reason: "need at least one positive shape" }.into());
        }
        check_alphas(&[self.alpha_true], "alpha_true")?;
        check_sigma(self.sigma_true, "sigma_true")?;
        check_fit(&self.sir, &self.grid, &self.series)
    }
}

/// `m` simulated datasets per `(alpha, sigma)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    pub m: usize,
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub base_seed: u64,
    /// `sir.seed` is replaced by a per-replicate seed.
    pub sir: SirConfig,
    pub prior: PriorSpec,
    pub grid: GridSpec,
    pub series: SeriesConfig,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            m: 200,
            alphas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            sigmas: default_sigmas(),
            base_seed: 0,
            sir: SirConfig::default(),
            prior: PriorSpec::default(),
            grid: GridSpec::default(),
            series: SeriesConfig::default(),
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(CoreError::InvalidConfig { field: "m", reason: "must be at least 1" }.into());
        }
        if self.m > u32::MAX as usize || self.alphas.len() * self.sigmas.len() > u32::MAX as usize {
            return Err(CoreError::InvalidConfig { field: "m", reason: "too many replicates" }.into());
        }
        check_alphas(&self.alphas, "alphas")?;
        check_sigmas(&self.sigmas, "sigmas")?;
        self.prior.validate()?;
        check_fit(&self.sir, &self.grid, &self.series)
    }
}

/// Reads a JSON config; `{}` gives all defaults.
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

/// Error for a command that needs a value no flag or config supplied.
pub(crate) fn missing(what: &str) -> Error {
    Error::Usage(what.to_string())
}

//! TOML run configurations, one shape per subcommand.
//!
//! Relative input paths are resolved against the directory holding the
//! config file.

use std::path::{Path, PathBuf};

use nudge_core::bandit::DEFAULT_LAMBDA_FACTOR;
use nudge_core::impact::{AnalysisOptions, Window};
use nudge_core::itempair::CandidateConfig;
use nudge_core::simulator::{BanditSettings, ExperimentDesign, SimConfig};
use nudge_core::traits::{CohortRules, ContextSpec, Day};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub svg: bool,
    /// Softmax temperature for the sensitivity table.
    pub sensitivity_tau: f64,
    pub lambda_factor: f64,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { svg: false, sensitivity_tau: 1.0, lambda_factor: DEFAULT_LAMBDA_FACTOR }
    }
}

pub struct SimulateConfig {
    pub sim: SimConfig,
    pub output: OutputOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeInputs {
    pub purchases: PathBuf,
    pub groups: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nudges: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logins: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub inputs: AnalyzeInputs,
    pub window: Window,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub output: OutputOptions,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendInputs {
    pub purchases: PathBuf,
    pub stock: PathBuf,
    #[serde(default)]
    pub logins: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendConfig {
    pub seed: Option<u64>,
    pub day: Day,
    pub inputs: RecommendInputs,
    #[serde(default)]
    pub cohort: CohortRules,
    #[serde(default)]
    pub candidates: CandidateConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignInputs {
    pub purchases: PathBuf,
    #[serde(default)]
    pub logins: Option<PathBuf>,
    #[serde(default)]
    pub nudges: Option<PathBuf>,
    /// Bandit snapshot; without one a fresh model is built from `arms`.
    #[serde(default)]
    pub model: Option<PathBuf>,
}

fn default_arms() -> Vec<String> {
    ["control", "personalized", "random"].map(String::from).to_vec()
}

fn default_context() -> ContextSpec {
    ExperimentDesign::default().context
}

fn default_draws() -> usize {
    1000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignConfig {
    pub seed: Option<u64>,
    pub day: Day,
    pub inputs: AssignInputs,
    #[serde(default = "default_arms")]
    pub arms: Vec<String>,
    #[serde(default = "default_context")]
    pub context: ContextSpec,
    #[serde(default)]
    pub cohort: CohortRules,
    #[serde(default)]
    pub bandit: BanditSettings,
    /// Monte Carlo draws for the best-arm confidence table.
    #[serde(default = "default_draws")]
    pub probability_draws: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportInputs {
    pub report: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub inputs: ReportInputs,
    #[serde(default)]
    pub output: OutputOptions,
}

pub fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<toml::Table>().map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))
}

pub fn from_table<T: DeserializeOwned>(path: &Path, table: toml::Table) -> Result<T, CliError> {
    T::deserialize(table).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    from_table(path, read_table(path)?)
}

pub fn load_simulate(path: &Path) -> Result<SimulateConfig, CliError> {
    let mut table = read_table(path)?;
    let output = match table.remove("output") {
        Some(v) => OutputOptions::deserialize(v)
            .map_err(|e| CliError::config(format!("{}: [output]: {}", path.display(), e.message())))?,
        None => OutputOptions::default(),
    };
    Ok(SimulateConfig { sim: from_table(path, table)?, output })
}

/// `p` relative to the config file's directory, unless already absolute.
pub fn resolve(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config_path.parent().map_or_else(|| p.to_path_buf(), |d| d.join(p))
}

/// Fails with the path if a required input is missing.
pub fn existing(config_path: &Path, p: &Path) -> Result<PathBuf, CliError> {
    let full = resolve(config_path, p);
    if !full.is_file() {
        return Err(CliError::config(format!("input file not found: {}", full.display())));
    }
    Ok(full)
}

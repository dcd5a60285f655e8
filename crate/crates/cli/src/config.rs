//! Run configuration: a TOML file whose keys the command-line flags mirror.
//!
//! ```toml
//! seed = 7
//! format = "text"          # text | csv | json
//! out = "results"
//!
//! [model]                  # variant, gamma, lambda, rho, m, sigma2_u, normalize_y
//! variant = "original_bt"
//! gamma = 0.33
//! lambda = 0.33
//! rho = 0.84
//! normalize_y = true
//!
//! [sim]                    # n, burn_in, generations, sampler = exact_cov | market
//! n = 200000
//!
//! [spec]                   # template, e.g. "multigen" or "lineage:father+maternal"
//! template = "multigen"
//!
//! [io]                     # input, mode = standardized | years_of_education
//! input = "panel.csv"
//!
//! [scenario.crisis_did]    # or [scenario.family_choice_split]
//! post_effect = 0.2
//!
//! [verify]                 # sample sizes of the cross-validation grid
//! n_anchor = 200000
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use multigen_core::panel::ReadMode;
use multigen_core::pedigree::{Scenario, DEFAULT_BURN_IN};
use multigen_core::{ModelParams, ParamConfig, SpecTemplate, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (text|csv|json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Joint-Gaussian draws from the exact pedigree covariance.
    #[default]
    ExactCov,
    /// Forward simulation: the marriage market for two-parent variants,
    /// single-parent dynasties otherwise.
    Market,
}

impl FromStr for Sampler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact_cov" => Ok(Sampler::ExactCov),
            "market" => Ok(Sampler::Market),
            other => Err(format!("unknown sampler {other:?} (exact_cov|market)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n: usize,
    pub burn_in: usize,
    /// Marriage-market generations, burn-in included.
    pub generations: usize,
    pub sampler: Sampler,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n: 10_000, burn_in: DEFAULT_BURN_IN, generations: 30, sampler: Sampler::ExactCov }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecConfig {
    pub template: String,
}

impl Default for SpecConfig {
    fn default() -> Self {
        SpecConfig { template: "multigen".into() }
    }
}

impl SpecConfig {
    pub fn template(&self) -> Result<SpecTemplate, CliError> {
        self.template.parse().map_err(CliError::Config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    pub mode: ReadMode,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig { input: None, mode: ReadMode::Standardized }
    }
}

/// Sample sizes and replication counts of the cross-validation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Pedigrees per anchor cell (the blue and red comparison processes).
    pub n_anchor: usize,
    /// Pedigrees per cell of the bias and lineage grids.
    pub n_grid: usize,
    /// Dynasties for the simplified-model recovery check.
    pub n_recovery: usize,
    /// Couples per generation in the marriage market.
    pub n_market: usize,
    pub market_generations: usize,
    pub burn_in: usize,
    pub did_n: usize,
    pub did_reps: usize,
    pub cluster_reps: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_anchor: 200_000,
            n_grid: 200_000,
            n_recovery: 100_000,
            n_market: 50_000,
            market_generations: 30,
            burn_in: DEFAULT_BURN_IN,
            did_n: 50_000,
            did_reps: 100,
            cluster_reps: 200,
        }
    }
}

impl VerifyConfig {
    /// A small grid for smoke tests; tolerances are unchanged, so Monte-Carlo
    /// rows may fail at these sizes.
    pub fn quick() -> Self {
        VerifyConfig {
            n_anchor: 20_000,
            n_grid: 20_000,
            n_recovery: 20_000,
            n_market: 5_000,
            market_generations: 12,
            burn_in: 40,
            did_n: 5_000,
            did_reps: 5,
            cluster_reps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    pub k_max: u32,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        MomentsConfig { k_max: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub model: Option<ParamConfig>,
    pub sim: SimConfig,
    pub spec: SpecConfig,
    pub io: IoConfig,
    pub scenario: Option<Scenario>,
    pub moments: MomentsConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20_240_601,
            out: None,
            format: Format::Text,
            model: None,
            sim: SimConfig::default(),
            spec: SpecConfig::default(),
            io: IoConfig::default(),
            scenario: None,
            moments: MomentsConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// The blue latent-factor process of the two-process comparison.
pub fn default_model() -> ParamConfig {
    ParamConfig {
        variant: Variant::LatentFactor,
        gamma: 0.0,
        lambda: 0.66,
        rho: 0.84,
        m: 0.0,
        sigma2_u: 0.0,
        normalize_y: true,
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_config(&self) -> ParamConfig {
        self.model.unwrap_or_else(default_model)
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.model_config()).map_err(|e| CliError::Config(e.to_string()))
    }
}

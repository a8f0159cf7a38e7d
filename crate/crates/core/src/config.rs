//! JSON experiment description.
//!
//! ```json
//! {
//!   "base": { "variant": "iid", "weights": [0.5, 0.5] },
//!   "fiber": { "alphabet_size": 2, "W": [[0.6, 0.4], [0.4, 0.6]] },
//!   "experiment": { "mode": "quenched", "ladder": { "log2_min": 12, "log2_max": 20 },
//!                   "replicates": 64, "environments": 5, "seed": 1, "burn_in_rungs": 0 },
//!   "entropy": { "k_max": 12, "coincidence_pairs": 1000000 }
//! }
//! ```
//!
//! Unknown keys are rejected. Sections a command does not use may be
//! omitted.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base_env::BaseProcess;
use crate::entropy::ReportSettings;
use crate::harness::{ExperimentConfig, Mode};
use crate::linalg::Matrix;
use crate::measures::RandomBernoulliSystem;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {}, column {}: {}", .0.line(), .0.column(), .0)]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        ConfigError::Schema(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSection {
    Iid { weights: Vec<f64> },
    Markov { transition: Vec<Vec<f64>>, #[serde(default)] initial: Option<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub alphabet_size: usize,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LadderSpec {
    Explicit(Vec<usize>),
    Geometric(GeometricLadder),
}

/// Rungs `2^log2_min, …, 2^log2_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricLadder {
    pub log2_min: u32,
    pub log2_max: u32,
}

impl LadderSpec {
    pub fn rungs(&self) -> Result<Vec<usize>, ConfigError> {
        match self {
            LadderSpec::Explicit(v) => Ok(v.clone()),
            LadderSpec::Geometric(g) => {
                if g.log2_min > g.log2_max || g.log2_max > 30 {
                    return Err(ConfigError::Schema("geometric ladder needs log2_min ≤ log2_max ≤ 30".into()));
                }
                Ok((g.log2_min..=g.log2_max).map(|k| 1usize << k).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: Mode,
    pub ladder: LadderSpec,
    pub replicates: usize,
    #[serde(default = "one")]
    pub environments: usize,
    pub seed: u64,
    #[serde(default)]
    pub burn_in_rungs: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySection {
    pub k_max: usize,
    pub coincidence_pairs: u64,
    /// Depth of the coincidence estimate; defaults to `min(4, k_max)`.
    #[serde(default)]
    pub coincidence_k: Option<usize>,
    #[serde(default = "default_h0_environments")]
    pub h0_environments: usize,
    /// Defaults to the experiment seed, or 0 without an experiment section.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_h0_environments() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub base: BaseSection,
    #[serde(default)]
    pub fiber: Option<FiberSection>,
    #[serde(default)]
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub entropy: Option<EntropySection>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Checks every present section against the domain invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base_process()?;
        if self.fiber.is_some() {
            self.system()?;
        }
        if self.experiment.is_some() {
            self.experiment()?.validate()?;
        }
        if self.entropy.is_some() {
            self.report_settings()?;
        }
        Ok(())
    }

    pub fn base_process(&self) -> Result<BaseProcess, ConfigError> {
        Ok(match &self.base {
            BaseSection::Iid { weights } => BaseProcess::iid(weights.clone())?,
            BaseSection::Markov { transition, initial } => {
                let t = Matrix::from_rows(transition.clone())?;
                match initial {
                    Some(init) => BaseProcess::markov_with_initial(t, init.clone())?,
                    None => BaseProcess::markov(t)?,
                }
            }
        })
    }

    fn emission(&self) -> Result<Option<Matrix>, ConfigError> {
        let Some(fiber) = &self.fiber else {
            return Ok(None);
        };
        if fiber.alphabet_size < 2 {
            return Err(ConfigError::Schema("fiber.alphabet_size must be at least 2".into()));
        }
        if fiber.w.iter().any(|row| row.len() != fiber.alphabet_size) {
            return Err(ConfigError::Schema("every row of fiber.W needs fiber.alphabet_size entries".into()));
        }
        Ok(Some(Matrix::from_rows(fiber.w.clone())?))
    }

    pub fn system(&self) -> Result<RandomBernoulliSystem, ConfigError> {
        let emission = self.emission()?.ok_or_else(|| ConfigError::Schema("missing section: fiber".into()))?;
        Ok(RandomBernoulliSystem::new(self.base_process()?, emission)?)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let e = self.experiment.as_ref().ok_or_else(|| ConfigError::Schema("missing section: experiment".into()))?;
        let config = ExperimentConfig {
            base: self.base_process()?,
            emission: self.emission()?,
            mode: e.mode,
            ladder: e.ladder.rungs()?,
            replicates: e.replicates,
            environments: e.environments,
            seed: e.seed,
            burn_in_rungs: e.burn_in_rungs,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn report_settings(&self) -> Result<ReportSettings, ConfigError> {
        let e = self.entropy.as_ref().ok_or_else(|| ConfigError::Schema("missing section: entropy".into()))?;
        if e.k_max == 0 {
            return Err(ConfigError::Schema("entropy.k_max must be positive".into()));
        }
        let coincidence_k = e.coincidence_k.unwrap_or(e.k_max.min(4));
        if coincidence_k == 0 {
            return Err(ConfigError::Schema("entropy.coincidence_k must be positive".into()));
        }
        Ok(ReportSettings {
            k_max: e.k_max,
            coincidence_k,
            coincidence_pairs: e.coincidence_pairs,
            h0_environments: e.h0_environments,
            empirical_length: None,
            seed: e.seed.or(self.experiment.as_ref().map(|x| x.seed)).unwrap_or(0),
        })
    }
}

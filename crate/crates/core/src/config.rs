//! Loading of configuration documents (TOML).
//!
//! Unknown fields are errors under [`FieldPolicy::Strict`] and are reported
//! and skipped under [`FieldPolicy::Permissive`].

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agents::LearningParams;
use crate::error::{Error, Result};
use crate::game::{GameConfig, DEFAULT_INITIAL_CAPITAL, DEFAULT_STEPS, DEFAULT_TIMENERGY};
use crate::grid::SweepGrid;
use crate::model::ProcessSpec;

pub const RUN_CONFIG_SCHEMA: &str = "capital-game/run-config";
pub const RUN_CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldPolicy {
    #[default]
    Strict,
    Permissive,
}

/// A parsed document plus the dotted paths of any fields that were skipped.
#[derive(Debug)]
pub struct Loaded<T> {
    pub value: T,
    pub ignored: Vec<String>,
}

pub fn parse_toml<T: DeserializeOwned>(
    text: &str,
    origin: &Path,
    policy: FieldPolicy,
) -> Result<Loaded<T>> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::parse(origin, e))?;
    let mut ignored = Vec::new();
    let value: T = serde_ignored::deserialize(de, |path| ignored.push(path.to_string()))
        .map_err(|e| Error::parse(origin, e))?;
    if policy == FieldPolicy::Strict {
        if let Some(field) = ignored.first() {
            return Err(Error::invalid(field.clone(), "unknown field"));
        }
    }
    Ok(Loaded { value, ignored })
}

pub fn load_toml<T: DeserializeOwned>(path: &Path, policy: FieldPolicy) -> Result<Loaded<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_toml(&text, path, policy)
}

fn default_initial_capital() -> f64 {
    DEFAULT_INITIAL_CAPITAL
}
fn default_timenergy() -> f64 {
    DEFAULT_TIMENERGY
}
fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_multiplier() -> f64 {
    1.0
}

/// Document describing a single game.
///
/// Processes are given either in full (`[[processes]]` tables) or as a
/// list of `elasticities` sharing one `multiplier`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigFile {
    pub schema: String,
    pub schema_version: u32,
    pub n_agents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processes: Option<Vec<ProcessSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elasticities: Option<Vec<f64>>,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    #[serde(default = "default_initial_capital")]
    pub initial_capital: f64,
    #[serde(default = "default_timenergy")]
    pub timenergy_per_turn: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    pub learning: LearningParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_stride: Option<usize>,
    #[serde(default)]
    pub consume_invested_capital: bool,
    /// Must equal the seed given on the command line when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfigFile {
    pub fn into_game_config(self, seed: u64) -> Result<GameConfig> {
        if self.schema != RUN_CONFIG_SCHEMA {
            return Err(Error::invalid(
                "schema",
                format!("expected {RUN_CONFIG_SCHEMA}, got {}", self.schema),
            ));
        }
        if self.schema_version != RUN_CONFIG_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        if let Some(s) = self.seed {
            if s != seed {
                return Err(Error::invalid(
                    "seed",
                    format!("config says {s} but the seed given is {seed}"),
                ));
            }
        }
        let processes = match (self.processes, self.elasticities) {
            (Some(p), None) => p,
            (None, Some(betas)) => betas
                .into_iter()
                .map(|beta| ProcessSpec {
                    beta,
                    multiplier: self.multiplier,
                })
                .collect(),
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "processes",
                    "give either `processes` or `elasticities`, not both",
                ))
            }
            (None, None) => {
                return Err(Error::invalid(
                    "processes",
                    "missing; give `processes` or `elasticities`",
                ))
            }
        };
        let config = GameConfig {
            n_agents: self.n_agents,
            processes,
            initial_capital: self.initial_capital,
            timenergy_per_turn: self.timenergy_per_turn,
            n_steps: self.n_steps,
            seed,
            learning: self.learning,
            trace_stride: self.trace_stride,
            consume_invested_capital: self.consume_invested_capital,
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn load_run_config(path: &Path, seed: u64, policy: FieldPolicy) -> Result<Loaded<GameConfig>> {
    let loaded: Loaded<RunConfigFile> = load_toml(path, policy)?;
    Ok(Loaded {
        value: loaded.value.into_game_config(seed)?,
        ignored: loaded.ignored,
    })
}

pub fn load_grid(path: &Path, policy: FieldPolicy) -> Result<Loaded<SweepGrid>> {
    let loaded: Loaded<SweepGrid> = load_toml(path, policy)?;
    loaded.value.validate()?;
    Ok(loaded)
}

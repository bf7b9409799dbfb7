//! Parameter grids for sweeps.
//!
//! A grid is the cross product of agent counts, process counts, elasticity
//! draws, learning parameters and repetitions. Points are addressed by a
//! flat index in a fixed nesting order (n, k, draw, alpha, gamma, epsilon,
//! repetition), so any point can be rebuilt without walking the grid.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::LearningParams;
use crate::error::{Error, Result};
use crate::game::{GameConfig, DEFAULT_INITIAL_CAPITAL, DEFAULT_STEPS, DEFAULT_TIMENERGY};
use crate::metrics::MaxProductionMode;
use crate::model::ProcessSpec;
use crate::seed;

pub const GRID_SCHEMA: &str = "capital-game/sweep-grid";
pub const GRID_VERSION: u32 = 1;

/// A list of values, written either explicitly or as `{ linspace = [start, end, count] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Linspace { linspace: (f64, f64, usize) },
}

impl Axis {
    pub fn linspace(start: f64, end: f64, count: usize) -> Self {
        Axis::Linspace {
            linspace: (start, end, count),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Values(ref v) => v.clone(),
            Axis::Linspace {
                linspace: (start, end, count),
            } => linspace(start, end, count),
        }
    }
}

/// `count` equidistant values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        end
                    } else {
                        start + step * i as f64
                    }
                })
                .collect()
        }
    }
}

fn default_range() -> (f64, f64) {
    (0.1, 0.9)
}
fn default_multiplier() -> f64 {
    1.0
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
fn default_group_by() -> Vec<String> {
    vec!["n".into(), "k".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub schema: String,
    pub schema_version: u32,
    /// Must equal the seed given on the command line when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    /// For k = 1 this many equidistant elasticities over the range; for
    /// k > 1 this many arrays of k elasticities drawn uniformly.
    pub elasticity_draws: usize,
    #[serde(default = "default_range")]
    pub elasticity_range: (f64, f64),
    pub alpha_values: Axis,
    pub gamma_values: Axis,
    pub epsilon_values: Axis,
    pub repetitions: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    #[serde(default = "default_initial_capital")]
    pub initial_capital: f64,
    #[serde(default = "default_timenergy")]
    pub timenergy_per_turn: f64,
    #[serde(default)]
    pub consume_invested_capital: bool,
    #[serde(default)]
    pub max_production_mode: MaxProductionMode,
    /// Group keys for the aggregate table written by a sweep.
    #[serde(default = "default_group_by")]
    pub group_by: Vec<String>,
}

impl SweepGrid {
    /// The full experimental grid: k = 2..256, n = 4..1024, ten values of
    /// each learning parameter, nine elasticity draws, four repetitions.
    pub fn full_scale() -> Self {
        Self {
            schema: GRID_SCHEMA.into(),
            schema_version: GRID_VERSION,
            master_seed: None,
            n_values: (2..=10).map(|e| 1usize << e).collect(),
            k_values: (1..=8).map(|e| 1usize << e).collect(),
            elasticity_draws: 9,
            elasticity_range: default_range(),
            alpha_values: Axis::linspace(0.01, 1.0, 10),
            gamma_values: Axis::linspace(0.0, 0.99, 10),
            epsilon_values: Axis::linspace(0.0, 0.1, 10),
            repetitions: 4,
            n_steps: DEFAULT_STEPS,
            multiplier: 1.0,
            initial_capital: DEFAULT_INITIAL_CAPITAL,
            timenergy_per_turn: DEFAULT_TIMENERGY,
            consume_invested_capital: false,
            max_production_mode: MaxProductionMode::StepTotal,
            group_by: default_group_by(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != GRID_SCHEMA {
            return Err(Error::invalid(
                "schema",
                format!("expected {GRID_SCHEMA}, got {}", self.schema),
            ));
        }
        if self.schema_version != GRID_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::invalid(
                "n_values",
                "need one or more positive agent counts",
            ));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::invalid(
                "k_values",
                "need one or more positive process counts",
            ));
        }
        if self.elasticity_draws == 0 {
            return Err(Error::invalid("elasticity_draws", "must be positive"));
        }
        let (lo, hi) = self.elasticity_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::invalid(
                "elasticity_range",
                format!("need 0 < lo <= hi < 1, got ({lo}, {hi})"),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be positive"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be positive"));
        }
        for (name, axis) in [
            ("alpha_values", &self.alpha_values),
            ("gamma_values", &self.gamma_values),
            ("epsilon_values", &self.epsilon_values),
        ] {
            if axis.values().is_empty() {
                return Err(Error::invalid(name, "need at least one value"));
            }
        }
        for a in self.alpha_values.values() {
            LearningParams::new(a, 0.0, 0.0).map_err(|e| prefix(e, "alpha_values"))?;
        }
        for g in self.gamma_values.values() {
            LearningParams::new(1.0, g, 0.0).map_err(|e| prefix(e, "gamma_values"))?;
        }
        for e in self.epsilon_values.values() {
            LearningParams::new(1.0, 0.0, e).map_err(|e| prefix(e, "epsilon_values"))?;
        }
        ProcessSpec::new(lo, self.multiplier).map_err(|e| prefix(e, "multiplier"))?;
        for key in &self.group_by {
            crate::aggregate::GroupKey::parse(key)?;
        }
        Ok(())
    }

    /// Number of runs in the grid.
    pub fn len(&self) -> usize {
        self.n_values.len()
            * self.k_values.len()
            * self.elasticity_draws
            * self.alpha_values.values().len()
            * self.gamma_values.values().len()
            * self.epsilon_values.values().len()
            * self.repetitions
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolve the grid against a master seed.
    pub fn expand(&self, master_seed: u64) -> Result<ExpandedGrid> {
        self.validate()?;
        if let Some(s) = self.master_seed {
            if s != master_seed {
                return Err(Error::invalid(
                    "master_seed",
                    format!("grid file says {s} but the seed given is {master_seed}"),
                ));
            }
        }
        let (lo, hi) = self.elasticity_range;
        let elasticities = self
            .k_values
            .iter()
            .map(|&k| {
                (0..self.elasticity_draws)
                    .map(|d| {
                        let betas =
                            elasticity_draw(master_seed, k, d, self.elasticity_draws, lo, hi);
                        betas
                            .into_iter()
                            .map(|beta| ProcessSpec::new(beta, self.multiplier))
                            .collect::<Result<Vec<_>>>()
                            .map(Arc::from)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpandedGrid {
            grid: self.clone(),
            master_seed,
            alphas: self.alpha_values.values(),
            gammas: self.gamma_values.values(),
            epsilons: self.epsilon_values.values(),
            elasticities,
        })
    }
}

fn prefix(e: Error, field: &str) -> Error {
    match e {
        Error::Invalid { reason, .. } => Error::invalid(field, reason),
        other => other,
    }
}

/// Elasticities for draw `d` of a `k`-process game. A single process walks
/// the range in equal steps across draws; several processes are sampled
/// uniformly from a stream keyed by `(master_seed, k, d)`.
pub fn elasticity_draw(
    master_seed: u64,
    k: usize,
    d: usize,
    draws: usize,
    lo: f64,
    hi: f64,
) -> Vec<f64> {
    if k == 1 {
        let betas = linspace(lo, hi, draws);
        return vec![if draws == 1 {
            (lo + hi) / 2.0
        } else {
            betas[d]
        }];
    }
    let mut rng = seed::rng(master_seed, &[seed::TAG_ELASTICITY, k as u64, d as u64]);
    (0..k)
        .map(|_| if lo == hi { lo } else { rng.gen_range(lo..hi) })
        .collect()
}

/// Seed of one run, a pure function of the master seed and the run's
/// coordinates.
pub fn run_seed(master_seed: u64, c: &Coordinates) -> u64 {
    seed::derive(
        master_seed,
        &[
            seed::TAG_RUN,
            c.n as u64,
            c.k as u64,
            c.elasticity_draw as u64,
            c.alpha.to_bits(),
            c.gamma.to_bits(),
            c.epsilon.to_bits(),
            c.repetition as u64,
        ],
    )
}

/// Where a run sits in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub n: usize,
    pub k: usize,
    pub elasticity_draw: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub repetition: usize,
}

impl Coordinates {
    /// Total order used for writing and reducing results.
    pub fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        self.n
            .cmp(&other.n)
            .then(self.k.cmp(&other.k))
            .then(self.elasticity_draw.cmp(&other.elasticity_draw))
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.gamma.total_cmp(&other.gamma))
            .then(self.epsilon.total_cmp(&other.epsilon))
            .then(self.repetition.cmp(&other.repetition))
    }
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub index: usize,
    pub coordinates: Coordinates,
    pub seed: u64,
    pub processes: Arc<[ProcessSpec]>,
    pub learning: LearningParams,
}

impl GridPoint {
    /// Game configuration for this point. Step traces are not kept.
    pub fn game_config(&self, grid: &SweepGrid) -> GameConfig {
        GameConfig {
            n_agents: self.coordinates.n,
            processes: self.processes.to_vec(),
            initial_capital: grid.initial_capital,
            timenergy_per_turn: grid.timenergy_per_turn,
            n_steps: grid.n_steps,
            seed: self.seed,
            learning: self.learning,
            trace_stride: Some(0),
            consume_invested_capital: grid.consume_invested_capital,
        }
    }
}

/// A grid with its elasticity arrays drawn.
#[derive(Debug, Clone)]
pub struct ExpandedGrid {
    pub grid: SweepGrid,
    pub master_seed: u64,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
    epsilons: Vec<f64>,
    /// `elasticities[k_index][draw]`.
    elasticities: Vec<Vec<Arc<[ProcessSpec]>>>,
}

impl ExpandedGrid {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn elasticities(&self, k_index: usize, draw: usize) -> &[ProcessSpec] {
        &self.elasticities[k_index][draw]
    }

    pub fn point(&self, index: usize) -> GridPoint {
        let g = &self.grid;
        let mut rest = index;
        let mut next = |radix: usize| {
            let digit = rest % radix;
            rest /= radix;
            digit
        };
        let repetition = next(g.repetitions);
        let ei = next(self.epsilons.len());
        let gi = next(self.gammas.len());
        let ai = next(self.alphas.len());
        let draw = next(g.elasticity_draws);
        let ki = next(g.k_values.len());
        let ni = next(g.n_values.len());
        let coordinates = Coordinates {
            n: g.n_values[ni],
            k: g.k_values[ki],
            elasticity_draw: draw,
            alpha: self.alphas[ai],
            gamma: self.gammas[gi],
            epsilon: self.epsilons[ei],
            repetition,
        };
        GridPoint {
            index,
            seed: run_seed(self.master_seed, &coordinates),
            processes: Arc::clone(&self.elasticities[ki][draw]),
            learning: LearningParams {
                alpha: coordinates.alpha,
                gamma: coordinates.gamma,
                epsilon: coordinates.epsilon,
            },
            coordinates,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Every configuration of the grid, in index order.
pub fn generate_grid(
    grid: &SweepGrid,
    master_seed: u64,
) -> Result<Vec<(GameConfig, LearningParams, u64)>> {
    let expanded = grid.expand(master_seed)?;
    Ok(expanded
        .points()
        .map(|p| (p.game_config(grid), p.learning, p.seed))
        .collect())
}

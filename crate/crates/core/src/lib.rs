//! Capital and labour production game.
//!
//! Agents repeatedly commit either their accumulated capital or their
//! per-turn timenergy to one of several Cobb-Douglas production processes,
//! get paid a share of the output, and learn which process-resource pair pays
//! best with stateless epsilon-greedy Q-learning.
//!
//! - [`model`]: production function, marginal productivities, payout rule.
//! - [`agents`]: q-tables, epsilon-greedy selection, the update rule.
//! - [`game`]: the turn loop and run driver.
//! - [`metrics`], [`record`]: run-level aggregates and the run record document.
//! - [`grid`], [`sweep`], [`aggregate`]: parameter sweeps and their tables.
//! - [`analyze`]: marginal-productivity curve tables.
//! - [`cli`]: the `capital` command.

pub mod agents;
pub mod aggregate;
pub mod analyze;
pub mod cli;
pub mod config;
pub mod error;
pub mod game;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod record;
pub mod seed;
pub mod sweep;

pub use error::{Error, Result};

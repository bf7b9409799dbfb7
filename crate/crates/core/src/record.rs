//! The run record document.
//!
//! Serialised as JSON with a fixed field order (struct declaration order) and
//! shortest round-trip float formatting, so equal records produce equal bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameConfig, StepTrace};
use crate::metrics::RunMetrics;

pub const RUN_RECORD_SCHEMA: &str = "capital-game/run-record";
pub const RUN_RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub schema: String,
    pub schema_version: u32,
    pub config: GameConfig,
    pub seed: u64,
    pub metrics: RunMetrics,
    /// Capital stock of each agent after the last step.
    pub final_capital: Vec<f64>,
    /// Every `trace_stride`-th step is kept in `traces`; 0 means none.
    pub trace_stride: usize,
    pub traces: Vec<StepTrace>,
}

impl RunRecord {
    pub fn new(
        config: GameConfig,
        metrics: RunMetrics,
        final_capital: Vec<f64>,
        trace_stride: usize,
        traces: Vec<StepTrace>,
    ) -> Result<Self> {
        Ok(Self {
            schema: RUN_RECORD_SCHEMA.to_string(),
            schema_version: RUN_RECORD_VERSION,
            seed: config.seed,
            config,
            metrics,
            final_capital,
            trace_stride,
            traces,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Runtime(format!("serialising run record: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let record: RunRecord = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if record.schema != RUN_RECORD_SCHEMA || record.schema_version != RUN_RECORD_VERSION {
            return Err(Error::invalid(
                "schema",
                format!(
                    "expected {RUN_RECORD_SCHEMA} v{RUN_RECORD_VERSION}, got {} v{}",
                    record.schema, record.schema_version
                ),
            ));
        }
        Ok(record)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

//! Sweep execution.
//!
//! Runs are independent and individually seeded, so they are scheduled on a
//! worker pool in any order; outputs are put back into coordinate order
//! before anything is written or reduced.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{
    aggregate, elasticity_bins, write_elasticity_bins, write_processes, write_results,
    AggregateTable, ElasticityBin, GroupKey, ProcessRow, ResultRow,
};
use crate::error::{Error, Result};
use crate::game::run_game;
use crate::grid::{Coordinates, ExpandedGrid, GridPoint};

pub const RESULTS_FILE: &str = "results.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const PROCESSES_FILE: &str = "processes.csv";
pub const ELASTICITY_BINS_FILE: &str = "elasticity_bins.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Number of equal-width elasticity bins used for the per-process table.
pub const ELASTICITY_BINS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub parallelism: usize,
    /// Abort on the first failed run instead of excluding it.
    pub strict: bool,
    /// Fill the `wall_time_ms` column. Off by default because timings make
    /// otherwise identical outputs differ.
    pub record_timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            parallelism: 1,
            strict: true,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub index: usize,
    pub coordinates: Coordinates,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub master_seed: u64,
    pub total_runs: usize,
    pub completed_runs: usize,
    pub excluded_runs: usize,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub results: Vec<ResultRow>,
    pub processes: Vec<ProcessRow>,
    pub aggregates: AggregateTable,
    pub elasticity_bins: Vec<ElasticityBin>,
    pub summary: SweepSummary,
}

struct RunOutcome {
    row: ResultRow,
    processes: Vec<ProcessRow>,
}

fn run_point(grid: &ExpandedGrid, point: &GridPoint, timing: bool) -> Result<RunOutcome> {
    let start = timing.then(Instant::now);
    let record = run_game(&point.game_config(&grid.grid))?;
    let m = &record.metrics;
    let wall_time_ms = start.map(|s| s.elapsed().as_millis() as u64);
    let row = ResultRow {
        coordinates: point.coordinates,
        seed: point.seed,
        average_production: m.average_production,
        max_production: m.max_production_by(grid.grid.max_production_mode),
        labour_ratio: m.labour_ratio,
        capital_strength: m.capital_strength,
        wall_time_ms,
    };
    let processes = m
        .processes
        .iter()
        .map(|p| ProcessRow {
            coordinates: point.coordinates,
            process_index: p.index,
            beta: p.beta,
            average_output: p.average_output,
            labour_share: p.labour_share,
        })
        .collect();
    Ok(RunOutcome { row, processes })
}

pub fn run_sweep(grid: &ExpandedGrid, options: SweepOptions) -> Result<SweepOutput> {
    let keys = GroupKey::parse_list(&grid.grid.group_by)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| Error::Runtime(format!("worker pool: {e}")))?;
    let outcomes: Vec<(GridPoint, Result<RunOutcome>)> = pool.install(|| {
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let point = grid.point(i);
                let outcome = run_point(grid, &point, options.record_timing);
                (point, outcome)
            })
            .collect()
    });

    let mut results = Vec::with_capacity(outcomes.len());
    let mut processes = Vec::new();
    let mut failures = Vec::new();
    for (point, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                results.push(o.row);
                processes.extend(o.processes);
            }
            Err(e) if options.strict => return Err(Error::Runtime(format!(
                "run {} (n={}, k={}, draw={}, alpha={}, gamma={}, epsilon={}, rep={}) failed: {e}",
                point.index,
                point.coordinates.n,
                point.coordinates.k,
                point.coordinates.elasticity_draw,
                point.coordinates.alpha,
                point.coordinates.gamma,
                point.coordinates.epsilon,
                point.coordinates.repetition,
            ))),
            Err(e) => failures.push(RunFailure {
                index: point.index,
                coordinates: point.coordinates,
                seed: point.seed,
                reason: e.to_string(),
            }),
        }
    }
    results.sort_by(|a, b| a.coordinates.cmp_key(&b.coordinates));
    processes.sort_by(|a, b| {
        a.coordinates
            .cmp_key(&b.coordinates)
            .then(a.process_index.cmp(&b.process_index))
    });

    let (lo, hi) = grid.grid.elasticity_range;
    let summary = SweepSummary {
        master_seed: grid.master_seed,
        total_runs: grid.len(),
        completed_runs: results.len(),
        excluded_runs: failures.len(),
        failures,
    };
    Ok(SweepOutput {
        aggregates: aggregate(&results, &keys),
        elasticity_bins: elasticity_bins(&processes, lo, hi, ELASTICITY_BINS),
        results,
        processes,
        summary,
    })
}

impl SweepOutput {
    /// Write every table into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(RESULTS_FILE), |w| write_results(w, &self.results))?;
        write_file(&dir.join(AGGREGATES_FILE), |w| self.aggregates.write(w))?;
        write_file(&dir.join(PROCESSES_FILE), |w| {
            write_processes(w, &self.processes)
        })?;
        write_file(&dir.join(ELASTICITY_BINS_FILE), |w| {
            write_elasticity_bins(w, &self.elasticity_bins)
        })?;
        let mut summary = serde_json::to_string_pretty(&self.summary)
            .map_err(|e| Error::Runtime(format!("serialising summary: {e}")))?;
        summary.push('\n');
        let path = dir.join(SUMMARY_FILE);
        std::fs::write(&path, summary).map_err(|e| Error::io(&path, e))
    }
}

pub(crate) fn write_file(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

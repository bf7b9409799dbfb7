//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for invalid input, 3 for
//! a run failure under `--strict`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::aggregate::{load_results, GroupKey};
use crate::analyze::{analyze, write_curves, CurveRequest, Ratio};
use crate::config::{load_grid, load_run_config, FieldPolicy};
use crate::error::{Error, Result};
use crate::game::run_game;
use crate::model::FormulaMode;
use crate::sweep::{run_sweep, SweepOptions};

/// Environment variable holding the default worker count for `sweep`.
pub const PARALLELISM_ENV: &str = "CAPITAL_PARALLELISM";

#[derive(Debug, Parser)]
#[command(name = "capital", version, about = "Capital/labour production game")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Master seed; required by `run` and `sweep`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (`analyze`, `run`, `aggregate`) or directory (`sweep`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, env = PARALLELISM_ENV, default_value_t = 1)]
    parallelism: usize,
    /// Reject unknown config fields and abort a sweep on the first failed run (default).
    #[arg(long, global = true, conflicts_with = "permissive")]
    strict: bool,
    /// Skip unknown config fields and exclude failed runs from aggregates.
    #[arg(long, global = true)]
    permissive: bool,
    /// Tabulate the alternative closed forms with the right-hand sides of
    /// mpC and mpL exchanged.
    #[arg(long, global = true)]
    paper_formulas: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Marginal-productivity curves over the elasticity of capital.
    Analyze {
        /// Labour:capital ratios.
        #[arg(long, value_delimiter = ',', default_value = "1:1,20:1,1:20")]
        ratios: Vec<String>,
        /// Interior elasticity grid points; beta = i / (points + 1).
        #[arg(long, default_value_t = 99)]
        beta_points: usize,
        #[arg(long, default_value_t = 1.0)]
        multiplier: f64,
    },
    /// Play one game from a config file and emit its run record.
    Run { config: PathBuf },
    /// Run every point of a grid file and write results and aggregates.
    Sweep {
        grid: PathBuf,
        /// Fill the wall_time_ms column (makes outputs differ between invocations).
        #[arg(long)]
        timing: bool,
    },
    /// Recompute grouped aggregates from a results file.
    Aggregate {
        results: PathBuf,
        /// Comma-separated group keys (n, k, elasticity_draw_index, alpha, gamma, epsilon).
        #[arg(long, value_delimiter = ',', default_value = "n,k")]
        group_by: Vec<String>,
    },
}

/// Parse `argv` and run; returns the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::invalid("seed", format!("`{command}` needs an explicit --seed")))
}

fn policy(global: &GlobalArgs) -> FieldPolicy {
    if global.permissive {
        FieldPolicy::Permissive
    } else {
        FieldPolicy::Strict
    }
}

fn warn_ignored(path: &Path, ignored: &[String]) {
    for field in ignored {
        eprintln!(
            "warning: {}: ignoring unknown field `{field}`",
            path.display()
        );
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let out = g.out.as_deref();
    match cli.command {
        Command::Analyze {
            ratios,
            beta_points,
            multiplier,
        } => {
            let request = CurveRequest {
                ratios: ratios
                    .iter()
                    .map(|r| r.parse::<Ratio>())
                    .collect::<Result<_>>()?,
                beta_points,
                multiplier,
                mode: if g.paper_formulas {
                    FormulaMode::PaperPrinted
                } else {
                    FormulaMode::TrueDerivatives
                },
            };
            let points = analyze(&request)?;
            let mut buf = Vec::new();
            write_curves(&mut buf, multiplier, &points)?;
            emit(out, &buf)
        }
        Command::Run { config } => {
            let seed = require_seed(g.seed, "run")?;
            let loaded = load_run_config(&config, seed, policy(g))?;
            warn_ignored(&config, &loaded.ignored);
            let record = run_game(&loaded.value)?;
            emit(out, record.to_json()?.as_bytes())
        }
        Command::Sweep { grid, timing } => {
            let seed = require_seed(g.seed, "sweep")?;
            let dir =
                out.ok_or_else(|| Error::invalid("out", "`sweep` needs --out <directory>"))?;
            let loaded = load_grid(&grid, policy(g))?;
            warn_ignored(&grid, &loaded.ignored);
            let expanded = loaded.value.expand(seed)?;
            let options = SweepOptions {
                parallelism: g.parallelism,
                strict: !g.permissive,
                record_timing: timing,
            };
            let output = run_sweep(&expanded, options)?;
            output.write(dir)?;
            if output.summary.excluded_runs > 0 {
                eprintln!(
                    "warning: {} of {} runs failed and were excluded",
                    output.summary.excluded_runs, output.summary.total_runs
                );
            }
            Ok(())
        }
        Command::Aggregate { results, group_by } => {
            let keys = GroupKey::parse_list(&group_by)?;
            let rows = load_results(&results)?;
            let table = crate::aggregate::aggregate(&rows, &keys);
            let mut buf = Vec::new();
            table.write(&mut buf)?;
            emit(out, &buf)
        }
    }
}

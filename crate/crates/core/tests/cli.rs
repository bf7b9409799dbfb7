use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use capital_game::aggregate::{aggregate, load_results, read_aggregates, GroupKey};
use capital_game::analyze::read_curves;
use capital_game::record::RunRecord;
use capital_game::sweep::SweepSummary;

fn capital(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capital"))
        .args(args)
        .env_remove("CAPITAL_PARALLELISM")
        .output()
        .expect("binary runs")
}

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn preset(name: &str) -> String {
    presets().join(name).to_str().unwrap().to_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const RUN: &str = r#"
schema = "capital-game/run-config"
schema_version = 1
n_agents = 4
elasticities = [0.3, 0.7]
n_steps = 200

[learning]
alpha = 0.3
gamma = 0.1
epsilon = 0.02
"#;

const GRID: &str = r#"
schema = "capital-game/sweep-grid"
schema_version = 1
n_values = [2, 4]
k_values = [1, 3]
elasticity_draws = 2
alpha_values = [0.3]
gamma_values = [0.1]
epsilon_values = [0.02]
repetitions = 2
n_steps = 100
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(capital(&["--help"]).status.code(), Some(0));
    assert_eq!(capital(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        capital(&["run", "x.toml", "--frobnicate"]).status.code(),
        Some(1)
    );
    assert_eq!(capital(&[]).status.code(), Some(1));
    assert_eq!(capital(&["sweep"]).status.code(), Some(1));
    assert_eq!(
        capital(&["--strict", "--permissive", "analyze"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn run_without_seed_is_rejected() {
    let out = capital(&["run", &preset("run.toml")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
}

#[test]
fn missing_config_exits_two() {
    let out = capital(&["run", "/nonexistent/run.toml", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_is_reproducible_and_parses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", RUN);
    let a = capital(&["run", &cfg, "--seed", "5"]);
    let b = capital(&["run", &cfg, "--seed", "5"]);
    let c = capital(&["run", &cfg, "--seed", "6"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);

    let record =
        RunRecord::from_json(std::str::from_utf8(&a.stdout).unwrap(), Path::new("stdout")).unwrap();
    assert_eq!(record.seed, 5);
    assert_eq!(record.metrics.steps, 200);
    assert_eq!(record.traces.len(), 200);
    assert_eq!(record.final_capital.len(), 4);

    let out_file = tmp.path().join("record.json");
    let d = capital(&[
        "run",
        &cfg,
        "--seed",
        "5",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert!(d.status.success());
    assert!(d.stdout.is_empty());
    assert_eq!(std::fs::read(&out_file).unwrap(), a.stdout);
}

#[test]
fn unknown_field_strict_and_permissive() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        &RUN.replace("epsilon = 0.02", "epsilon = 0.02\ntemperature = 2"),
    );
    let strict = capital(&["run", &cfg, "--seed", "1"]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(
        stderr(&strict).contains("learning.temperature"),
        "{}",
        stderr(&strict)
    );

    let permissive = capital(&["run", &cfg, "--seed", "1", "--permissive"]);
    assert!(permissive.status.success(), "{}", stderr(&permissive));
    assert!(stderr(&permissive).contains("learning.temperature"));
}

#[test]
fn invalid_value_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        &RUN.replace("n_agents = 4", "n_agents = 0"),
    );
    let out = capital(&["run", &cfg, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_agents"), "{}", stderr(&out));
}

#[test]
fn file_seed_must_match() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", &format!("seed = 3\n{RUN}"));
    assert!(capital(&["run", &cfg, "--seed", "3"]).status.success());
    assert_eq!(
        capital(&["run", &cfg, "--seed", "4"]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_outputs_independent_of_parallelism() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "grid.toml", GRID);
    let mut dirs = Vec::new();
    for p in ["1", "8"] {
        let dir = tmp.path().join(format!("out{p}"));
        let out = capital(&[
            "sweep",
            &grid,
            "--seed",
            "9",
            "--parallelism",
            p,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        dirs.push(dir);
    }
    for file in [
        "results.csv",
        "aggregates.csv",
        "processes.csv",
        "elasticity_bins.csv",
        "summary.json",
    ] {
        let a = std::fs::read(dirs[0].join(file)).unwrap();
        let b = std::fs::read(dirs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let rows = load_results(&dirs[0].join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2 * 2);
    assert!(rows.iter().all(|r| r.wall_time_ms.is_none()));
}

#[test]
fn parallelism_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "grid.toml", GRID);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(
        capital(&["sweep", &grid, "--seed", "2", "--out", a.to_str().unwrap()])
            .status
            .success()
    );
    let env = Command::new(env!("CARGO_BIN_EXE_capital"))
        .args(["sweep", &grid, "--seed", "2", "--out", b.to_str().unwrap()])
        .env("CAPITAL_PARALLELISM", "3")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(
        std::fs::read(a.join("results.csv")).unwrap(),
        std::fs::read(b.join("results.csv")).unwrap()
    );
}

#[test]
fn aggregate_command_reproduces_sweep_table() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "grid.toml", GRID);
    let dir = tmp.path().join("out");
    assert!(capital(&[
        "sweep",
        &grid,
        "--seed",
        "4",
        "--out",
        dir.to_str().unwrap()
    ])
    .status
    .success());
    let results = dir.join("results.csv");
    let out = capital(&["aggregate", results.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        out.stdout,
        std::fs::read(dir.join("aggregates.csv")).unwrap()
    );

    let by_k = capital(&["aggregate", results.to_str().unwrap(), "--group-by", "k"]);
    let table = read_aggregates(&by_k.stdout[..], Path::new("stdout")).unwrap();
    let rows = load_results(&results).unwrap();
    assert_eq!(table, aggregate(&rows, &[GroupKey::K]));
    assert_eq!(table.total_runs(), rows.len());

    let bad = capital(&[
        "aggregate",
        results.to_str().unwrap(),
        "--group-by",
        "colour",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn timing_column_only_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "grid.toml", GRID);
    let dir = tmp.path().join("out");
    assert!(capital(&[
        "sweep",
        &grid,
        "--seed",
        "1",
        "--timing",
        "--out",
        dir.to_str().unwrap()
    ])
    .status
    .success());
    let rows = load_results(&dir.join("results.csv")).unwrap();
    assert!(rows.iter().all(|r| r.wall_time_ms.is_some()));
}

#[test]
fn failed_runs_strict_and_permissive() {
    // Capital near the top of the f64 range overflows production.
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(
        tmp.path(),
        "grid.toml",
        &format!("{GRID}initial_capital = 1.5e308\n"),
    );
    let dir = tmp.path().join("out");
    let strict = capital(&[
        "sweep",
        &grid,
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(strict.status.code(), Some(3), "{}", stderr(&strict));

    let permissive = capital(&[
        "sweep",
        &grid,
        "--seed",
        "1",
        "--permissive",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(permissive.status.success(), "{}", stderr(&permissive));
    let summary: SweepSummary =
        serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.total_runs, 16);
    assert!(summary.excluded_runs > 0);
    assert_eq!(
        summary.completed_runs + summary.excluded_runs,
        summary.total_runs
    );
    assert_eq!(summary.failures.len(), summary.excluded_runs);
    let rows = load_results(&dir.join("results.csv")).unwrap();
    assert_eq!(rows.len(), summary.completed_runs);
}

#[test]
fn sweep_requires_seed_and_out() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "grid.toml", GRID);
    assert_eq!(
        capital(&["sweep", &grid, "--out", tmp.path().to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        capital(&["sweep", &grid, "--seed", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn analyze_default_curves() {
    let out = capital(&["analyze"]);
    assert!(out.status.success());
    let pts = read_curves(&out.stdout[..], Path::new("stdout")).unwrap();
    assert_eq!(pts.len(), 3 * 99);
    let ratios: Vec<(f64, f64)> = pts
        .chunks(99)
        .map(|c| (c[0].ratio.labour, c[0].ratio.capital))
        .collect();
    assert_eq!(ratios, [(1.0, 1.0), (20.0, 1.0), (1.0, 20.0)]);
    // Capital is more productive where it is scarce.
    let at = |r: usize, i: usize| &pts[r * 99 + i];
    assert!(at(1, 49).mpc > at(0, 49).mpc && at(0, 49).mpc > at(2, 49).mpc);

    let bad = capital(&["analyze", "--ratios", "1:0"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn presets_load_and_are_desk_sized() {
    for name in [
        "smoke.toml",
        "elasticity.toml",
        "heatmap.toml",
        "learning.toml",
    ] {
        let grid = capital_game::config::load_grid(
            &presets().join(name),
            capital_game::config::FieldPolicy::Strict,
        )
        .unwrap()
        .value;
        assert!(grid.len() <= 2000, "{name}: {} runs", grid.len());
    }
    let full = capital_game::config::load_grid(
        &presets().join("full.toml"),
        capital_game::config::FieldPolicy::Strict,
    )
    .unwrap()
    .value;
    assert_eq!(full.len(), 2_592_000);
    assert_eq!(full, capital_game::grid::SweepGrid::full_scale());
}

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::empirical_cvar;
use crate::env::{horizon_for_difficulty, load_map, sample_in_region, sample_start_goal, MazeMap};
use crate::executor::{execute, execute_waypoints, TrajectoryRecord};
use crate::geometry::Point;
use crate::lower::{Backend, OracleBackend, TabularBackend, TabularConfig, ValueBackend};
use crate::planner::{plan, plan_unconstrained, sorb_plan, PathSolution, PlannerConfig};

use super::config::{Algorithm, BackendKind, ExperimentConfig, StartGoalMode};
use super::HarnessError;

/// Version of the per-trial CSV layout.
pub const SCHEMA_VERSION: u32 = 1;

/// One trial, as written to `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub backend: String,
    pub difficulty: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub alpha: f64,
    pub trial: usize,
    pub seed: u64,
    pub start_x: f64,
    pub start_y: f64,
    pub goal_x: f64,
    pub goal_y: f64,
    pub horizon: usize,
    pub planned: bool,
    pub waypoints: usize,
    pub success: bool,
    pub stalled: bool,
    pub steps: usize,
    pub negated_reward: f64,
    pub realized_cost: f64,
    pub certificate_cvar: Option<f64>,
    pub violated: bool,
}

/// Aggregates of one (algorithm, difficulty, K, alpha) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub difficulty: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub alpha: f64,
    pub trials: usize,
    pub planned: usize,
    pub success_rate: f64,
    /// Over successful trials only.
    pub mean_negated_reward: Option<f64>,
    /// Mean realized cost over executed trials.
    pub expected_cost: Option<f64>,
    pub cvar_90: Option<f64>,
    pub cvar_50: Option<f64>,
    pub cvar_10: Option<f64>,
    pub violation_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<CellSummary>,
}

/// Builds the configured backend, or loads it from a snapshot.
pub fn build_backend(cfg: &ExperimentConfig, map: &MazeMap) -> Result<Backend, HarnessError> {
    if let Some(path) = &cfg.backend_snapshot {
        return Backend::load(path).map_err(|e| HarnessError::Backend(e.to_string()));
    }
    match cfg.backend {
        BackendKind::Oracle => OracleBackend::build(map, cfg.grid_res, cfg.eta)
            .map(Backend::Oracle)
            .map_err(|e| HarnessError::Backend(e.to_string())),
        BackendKind::Tabular => {
            let tc = TabularConfig {
                grid_res: cfg.grid_res,
                eta: cfg.eta,
                ..TabularConfig::default()
            };
            TabularBackend::train(map, &tc)
                .map(Backend::Tabular)
                .map_err(|e| HarnessError::Backend(e.to_string()))
        }
    }
}

/// Start and goal for a trial seed.
pub fn trial_endpoints(
    backend: &dyn ValueBackend,
    mode: &StartGoalMode,
    difficulty: Option<f64>,
    seed: u64,
) -> Result<(Point, Point), HarnessError> {
    let map = backend.map();
    let grid = backend.grid();
    let sampled = match (mode, difficulty) {
        (StartGoalMode::Difficulty, Some(d)) => sample_start_goal(map, grid, d, seed),
        (StartGoalMode::Regions { start, goal }, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_in_region(map, grid, *start, &mut rng)
                .and_then(|s| sample_in_region(map, grid, *goal, &mut rng).map(|g| (s, g)))
        }
        (StartGoalMode::Difficulty, None) => unreachable!("difficulty mode always has a level"),
    };
    sampled.map_err(|e| HarnessError::Sampling(e.to_string()))
}

/// Parameters shared by every trial of a cell.
#[derive(Debug, Clone, Copy)]
pub struct CellSpec {
    pub algorithm: Algorithm,
    pub difficulty: Option<f64>,
    pub k: Option<f64>,
    pub alpha: f64,
    pub horizon: usize,
    pub iterations: usize,
    pub sorb_nodes: usize,
}

/// Plans (if the algorithm has a planner) and executes one trial.
pub fn run_trial(
    backend: &dyn ValueBackend,
    cell: &CellSpec,
    start: Point,
    goal: Point,
    seed: u64,
) -> (Option<PathSolution>, Option<TrajectoryRecord>) {
    let planner_cfg = PlannerConfig::constrained(cell.k.unwrap_or(f64::INFINITY), cell.alpha, cell.iterations, seed);
    let path = match cell.algorithm {
        Algorithm::Cop => plan(backend, start, goal, &planner_cfg).ok().and_then(|o| o.best),
        Algorithm::RrtstarUnconstrained => plan_unconstrained(backend, start, goal, &planner_cfg)
            .ok()
            .and_then(|o| o.best)
            .and_then(|p| PathSolution::evaluate(backend, p.waypoints, cell.alpha).ok()),
        Algorithm::Sorb => sorb_plan(backend, start, goal, cell.sorb_nodes, backend.eta(), cell.alpha, seed),
        Algorithm::Grl => {
            let rec = execute_waypoints(backend, &[start], goal, cell.horizon, seed);
            return (None, Some(rec));
        }
    };
    let rec = path.as_ref().map(|p| execute(backend, p, goal, cell.horizon, seed));
    (path, rec)
}

/// Runs every cell of the grid. Trials run in parallel; rows come back in
/// (algorithm, difficulty, K, alpha, trial) order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let text = std::fs::read_to_string(&cfg.map).map_err(|e| HarnessError::Io(cfg.map.clone(), e))?;
    let map = load_map(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let backend = build_backend(cfg, &map)?;
    run_with_backend(cfg, &backend)
}

pub fn run_with_backend(cfg: &ExperimentConfig, backend: &Backend) -> Result<ExperimentResult, HarnessError> {
    let mut rows = Vec::new();
    for &algorithm in &cfg.algorithms {
        for difficulty in cfg.difficulty_levels() {
            let horizon = cfg
                .horizon
                .unwrap_or_else(|| horizon_for_difficulty(difficulty.expect("difficulty mode")));
            for &k in &cfg.k {
                for &alpha in &cfg.alpha {
                    let cell = CellSpec {
                        algorithm,
                        difficulty,
                        k,
                        alpha,
                        horizon,
                        iterations: cfg.iterations,
                        sorb_nodes: cfg.sorb_nodes,
                    };
                    let cell_rows: Result<Vec<TrialRow>, HarnessError> = (0..cfg.trials)
                        .into_par_iter()
                        .map(|trial| {
                            let seed = cfg.base_seed + trial as u64;
                            let (start, goal) = trial_endpoints(backend, &cfg.start_goal, difficulty, seed)?;
                            let (path, rec) = run_trial(backend, &cell, start, goal, seed);
                            Ok(make_row(
                                backend,
                                &cell,
                                trial,
                                seed,
                                start,
                                goal,
                                path.as_ref(),
                                rec.as_ref(),
                            ))
                        })
                        .collect();
                    rows.extend(cell_rows?);
                }
            }
        }
    }
    let summary = summarize(&rows);
    Ok(ExperimentResult { rows, summary })
}

#[allow(clippy::too_many_arguments)]
fn make_row(
    backend: &Backend,
    cell: &CellSpec,
    trial: usize,
    seed: u64,
    start: Point,
    goal: Point,
    path: Option<&PathSolution>,
    rec: Option<&TrajectoryRecord>,
) -> TrialRow {
    let realized_cost = rec.map_or(0.0, |r| r.realized_cost);
    TrialRow {
        schema_version: SCHEMA_VERSION,
        algorithm: cell.algorithm,
        backend: backend.kind().to_string(),
        difficulty: cell.difficulty,
        k: cell.k,
        alpha: cell.alpha,
        trial,
        seed,
        start_x: start.x,
        start_y: start.y,
        goal_x: goal.x,
        goal_y: goal.y,
        horizon: cell.horizon,
        planned: rec.is_some(),
        waypoints: path.map_or(0, |p| p.waypoints.len()),
        success: rec.is_some_and(|r| r.success),
        stalled: rec.is_some_and(|r| r.stalled),
        steps: rec.map_or(0, |r| r.steps),
        negated_reward: rec.map_or(0.0, |r| r.negated_reward),
        realized_cost,
        certificate_cvar: path.map(|p| p.cvar_certificate),
        violated: rec.is_some() && cell.k.is_some_and(|k| realized_cost > k),
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Per-cell aggregates, in order of first appearance.
pub fn summarize(rows: &[TrialRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(Algorithm, Option<f64>, Option<f64>, f64)> = Vec::new();
    for r in rows {
        let key = (r.algorithm, r.difficulty, r.k, r.alpha);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|key| {
            let mut cell: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| (r.algorithm, r.difficulty, r.k, r.alpha) == key)
                .collect();
            cell.sort_by_key(|r| r.trial);
            let executed: Vec<&TrialRow> = cell.iter().copied().filter(|r| r.planned).collect();
            let costs: Vec<f64> = executed.iter().map(|r| r.realized_cost).collect();
            let rewards: Vec<f64> = cell.iter().filter(|r| r.success).map(|r| r.negated_reward).collect();
            let successes = rewards.len();
            CellSummary {
                algorithm: key.0,
                difficulty: key.1,
                k: key.2,
                alpha: key.3,
                trials: cell.len(),
                planned: executed.len(),
                success_rate: successes as f64 / cell.len() as f64,
                mean_negated_reward: mean(&rewards),
                expected_cost: mean(&costs),
                cvar_90: empirical_cvar(&costs, 0.9),
                cvar_50: empirical_cvar(&costs, 0.5),
                cvar_10: empirical_cvar(&costs, 0.1),
                violation_pct: (!executed.is_empty())
                    .then(|| 100.0 * executed.iter().filter(|r| r.violated).count() as f64 / executed.len() as f64),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Csv(path.to_path_buf(), e.to_string()))?;
    for item in items {
        w.serialize(item)
            .map_err(|e| HarnessError::Csv(path.to_path_buf(), e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

/// File names written by [`write_results`].
pub const TRIALS_CSV: &str = "trials.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

/// Writes `trials.csv` and `summary.csv` into `dir`, creating it if needed.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    write_csv(&dir.join(TRIALS_CSV), &result.rows)?;
    write_csv(&dir.join(SUMMARY_CSV), &result.summary)
}

pub fn read_rows(path: &Path) -> Result<Vec<TrialRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Csv(path.to_path_buf(), e.to_string()))?;
    let rows: Vec<TrialRow> = r
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Csv(path.to_path_buf(), e.to_string()))?;
    if let Some(bad) = rows.iter().find(|r| r.schema_version != SCHEMA_VERSION) {
        return Err(HarnessError::Csv(
            path.to_path_buf(),
            format!("unsupported schema version {}", bad.schema_version),
        ));
    }
    Ok(rows)
}

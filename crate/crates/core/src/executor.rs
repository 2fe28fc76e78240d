//! Runs a waypoint path in the environment with the lower-level policy.

use serde::{Deserialize, Serialize};

use crate::env::EpisodeState;
use crate::geometry::Point;
use crate::lower::ValueBackend;
use crate::planner::PathSolution;

/// Steps without progress toward the current waypoint, in units of `eta`,
/// before a run is abandoned.
pub const STALL_ETAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub position: Point,
    pub reward: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub success: bool,
    pub steps: usize,
    pub negated_reward: f64,
    pub realized_cost: f64,
    /// True when the run was abandoned for lack of progress.
    pub stalled: bool,
    pub seed: u64,
    pub horizon: usize,
    pub trace: Vec<TraceStep>,
}

/// Follows `waypoints` (starting at `waypoints[0]`) and then `goal`,
/// switching to the next waypoint once within the map's goal tolerance.
/// Pairs the backend cannot answer locally fall back to a straight step.
pub fn execute_waypoints(
    backend: &dyn ValueBackend,
    waypoints: &[Point],
    goal: Point,
    horizon: usize,
    seed: u64,
) -> TrajectoryRecord {
    assert!(!waypoints.is_empty(), "need at least the start point");
    let map = backend.map();
    let tol = map.goal_tolerance();
    let mut targets: Vec<Point> = waypoints[1..].to_vec();
    if targets.last().is_none_or(|&w| w != goal) {
        targets.push(goal);
    }
    let stall_limit = (STALL_ETAS * backend.eta() / map.step_len()).ceil() as usize;

    let mut ep = EpisodeState::new(map, waypoints[0], goal, horizon, seed);
    let mut trace = Vec::new();
    let mut realized_cost = 0.0;
    let mut target = 0;
    let mut best_gap = f64::INFINITY;
    let mut idle = 0;
    let mut stalled = false;
    while !ep.is_done(map) {
        let pos = ep.position();
        while target + 1 < targets.len() && pos.dist(targets[target]) <= tol {
            target += 1;
            best_gap = f64::INFINITY;
            idle = 0;
        }
        let w = targets[target];
        let action = backend
            .local_policy(pos, w)
            .unwrap_or_else(|_| (w - pos).clamp_norm(map.a_max()));
        let out = ep.step(map, action);
        realized_cost += out.cost;
        trace.push(TraceStep {
            position: ep.position(),
            reward: out.reward,
            cost: out.cost,
        });
        let gap = ep.position().dist(w);
        if gap < best_gap - 1e-9 {
            best_gap = gap;
            idle = 0;
        } else {
            idle += 1;
            if idle >= stall_limit && !ep.at_goal(map) {
                stalled = true;
                break;
            }
        }
    }
    let steps = ep.step_count();
    TrajectoryRecord {
        success: ep.at_goal(map),
        steps,
        negated_reward: steps as f64,
        realized_cost,
        stalled,
        seed,
        horizon,
        trace,
    }
}

/// Executes a planned path toward the goal `goal`.
pub fn execute(
    backend: &dyn ValueBackend,
    path: &PathSolution,
    goal: Point,
    horizon: usize,
    seed: u64,
) -> TrajectoryRecord {
    execute_waypoints(backend, &path.waypoints, goal, horizon, seed)
}

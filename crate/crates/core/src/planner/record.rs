use serde::{Deserialize, Serialize};

use crate::dist::CategoricalDist;
use crate::geometry::Point;

use super::{PathSolution, PlannerConfig, TreeEdge};

/// JSON record of one planner run. Fields other than `wall_time_ms` depend
/// only on the inputs, so records of repeated runs compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub start: Point,
    pub goal: Point,
    pub waypoints: Vec<Point>,
    #[serde(rename = "R_sigma")]
    pub r_sigma: Option<f64>,
    pub cost_dist: Option<CategoricalDist>,
    pub cvar: Option<f64>,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub wall_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<Vec<TreeEdge>>,
}

impl PlanRecord {
    pub fn new(start: Point, goal: Point, best: Option<&PathSolution>, cfg: &PlannerConfig) -> Self {
        Self {
            start,
            goal,
            waypoints: best.map(|b| b.waypoints.clone()).unwrap_or_default(),
            r_sigma: best.map(|b| b.r_sigma),
            cost_dist: best.map(|b| b.cost_dist.clone()),
            cvar: best.map(|b| b.cvar_certificate),
            alpha: cfg.alpha,
            // JSON has no infinity; an unconstrained run records null
            k: cfg.k.is_finite().then_some(cfg.k),
            iterations: cfg.iterations,
            seed: cfg.seed,
            wall_time_ms: None,
            tree: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan records serialize")
    }
}

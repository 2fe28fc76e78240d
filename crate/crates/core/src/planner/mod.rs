//! Upper-level planners over a [`ValueBackend`]: constrained informed RRT*
//! with CVaR edge validation, its unconstrained special case, and a
//! complete-graph shortest-path baseline.

mod record;
mod rrt;
mod sampling;
mod sorb;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{CategoricalDist, ConvolveMode};
use crate::geometry::Point;
use crate::lower::{QueryError, ValueBackend};

pub use record::PlanRecord;
pub use rrt::{plan, plan_unconstrained, valid_edge, PlanOutcome};
pub use sampling::{gamma_lower_bound, informed_sample, rewiring_radius, steer, unit_ball_volume, ELLIPSE_REJECTIONS};
pub use sorb::{sorb_plan, SorbGraph};
pub use tree::{Node, NodeId, PlanTree, TreeEdge};

/// State-space dimension of the maze.
pub const STATE_DIM: u32 = 2;
/// Multiplier applied to the lower bound when `gamma` is automatic.
pub const AUTO_GAMMA_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Cost threshold `K`.
    pub k: f64,
    /// CVaR level in `(0, 1]`.
    pub alpha: f64,
    pub iterations: usize,
    /// Steering cap; `None` uses the backend's locality radius.
    pub eta: Option<f64>,
    /// Rewiring constant; `None` picks `1.1 x` the lower bound.
    pub gamma: Option<f64>,
    /// Goal-region radius; `None` uses the map's goal tolerance.
    pub goal_radius: Option<f64>,
    /// Probability of sampling the goal itself.
    pub goal_bias: f64,
    /// Support size of the clamped cumulative-cost distributions.
    pub cost_atoms: usize,
    pub seed: u64,
    /// Check tree invariants after every iteration.
    pub debug_checks: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            k: f64::INFINITY,
            alpha: 1.0,
            iterations: 1000,
            eta: None,
            gamma: None,
            goal_radius: None,
            goal_bias: 0.05,
            cost_atoms: 256,
            seed: 0,
            debug_checks: false,
        }
    }
}

impl PlannerConfig {
    pub fn constrained(k: f64, alpha: f64, iterations: usize, seed: u64) -> Self {
        Self {
            k,
            alpha,
            iterations,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::BadConfig(m.to_string()));
        if !(self.k >= 0.0) {
            return bad("K must be nonnegative");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.eta.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return bad("eta must be positive");
        }
        if self.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
            return bad("gamma must be positive");
        }
        if self.goal_radius.is_some_and(|r| !(r > 0.0)) {
            return bad("goal radius must be positive");
        }
        if !(0.0..1.0).contains(&self.goal_bias) {
            return bad("goal bias must lie in [0, 1)");
        }
        if self.cost_atoms < 2 {
            return bad("cost support needs at least two atoms");
        }
        Ok(())
    }

    /// True unless the check reduces to `E[cost] <= inf`.
    pub fn is_constrained(&self) -> bool {
        self.k.is_finite()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planner config: {0}")]
    BadConfig(String),
    #[error("start {0:?} is not in free space")]
    BadStart(Point),
    #[error("goal {0:?} is not in free space")]
    BadGoal(Point),
}

/// A validated waypoint path with its reward and exact cost distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSolution {
    pub waypoints: Vec<Point>,
    pub r_sigma: f64,
    pub cost_dist: CategoricalDist,
    pub cvar_certificate: f64,
}

impl PathSolution {
    /// Evaluates `waypoints` leg by leg with exact convolution.
    pub fn evaluate(backend: &dyn ValueBackend, waypoints: Vec<Point>, alpha: f64) -> Result<Self, QueryError> {
        let mut r_sigma = 0.0;
        let mut cost = tree::zero_cost();
        for w in waypoints.windows(2) {
            r_sigma += backend.value(w[0], w[1])?;
            cost = cost
                .convolve(&backend.cost_dist(w[0], w[1])?, ConvolveMode::Exact)
                .expect("cost supports share spacing")
                .trimmed();
        }
        let cvar_certificate = cost.cvar_alpha(alpha).expect("alpha validated by caller");
        Ok(Self {
            waypoints,
            r_sigma,
            cost_dist: cost,
            cvar_certificate,
        })
    }

    /// Path length `-R`.
    pub fn length(&self) -> f64 {
        -self.r_sigma
    }
}

//! Goal-conditioned local estimators.
//!
//! A [`ValueBackend`] answers three local queries for pairs of states that
//! are at most `eta` apart in path length: the expected reward `V(s, s')`
//! (with a reward of -1 per unit of travel, `-V` is the shortest-path
//! length), the categorical distribution of accumulated cost `V_c(s, s')`,
//! and a greedy one-step action toward `s'`.
//!
//! Two implementations are provided: [`OracleBackend`] (exact grid
//! shortest paths) and [`TabularBackend`] (categorical distributional value
//! iteration over cell/goal pairs).

mod oracle;
mod snapshot;
mod tabular;

use thiserror::Error;

use crate::dist::CategoricalDist;
use crate::env::MazeMap;
use crate::geometry::Point;
use crate::grid::{Cell, GridModel};

pub use oracle::OracleBackend;
pub use snapshot::{load_backend, save_backend, Backend, SnapshotError, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use tabular::{TabularBackend, TabularConfig, TrainError, TrainingReport};

/// Default locality radius, in map units.
pub const DEFAULT_ETA: f64 = 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("pair is not local: estimated path length exceeds eta = {eta}")]
    Locality { eta: f64 },
    #[error("pair is unreachable")]
    Unreachable,
    #[error("point {0:?} is outside the backend's domain")]
    OutsideDomain(Point),
}

pub trait ValueBackend: Send + Sync {
    fn map(&self) -> &MazeMap;

    fn grid(&self) -> &GridModel;

    /// Locality radius.
    fn eta(&self) -> f64;

    fn grid_res(&self) -> f64 {
        self.grid().res()
    }

    /// Estimated shortest-path length `-V(s, t)` for a local pair.
    fn distance(&self, s: Point, t: Point) -> Result<f64, QueryError>;

    /// How far `-V(s, t)` may fall below the Euclidean distance between the
    /// centres of the cells holding `s` and `t`.
    fn center_slack(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.grid_res()
    }

    /// Expected reward `V(s, t)`; never positive.
    fn value(&self, s: Point, t: Point) -> Result<f64, QueryError> {
        self.distance(s, t).map(|d| -d)
    }

    /// Distribution of the cost accumulated by the greedy policy from `s` to `t`.
    fn cost_dist(&self, s: Point, t: Point) -> Result<CategoricalDist, QueryError>;

    /// Greedy action toward `goal`, of length at most `a_max`.
    fn local_policy(&self, s: Point, goal: Point) -> Result<Point, QueryError>;
}

pub(crate) fn cell_of(grid: &GridModel, p: Point) -> Result<Cell, QueryError> {
    grid.cell_at(p).ok_or(QueryError::OutsideDomain(p))
}

/// Shared greedy action rule: head straight for the goal when the segment
/// is clear, otherwise toward the centre of the next-hop cell.
pub(crate) fn greedy_action(
    map: &MazeMap,
    grid: &GridModel,
    s: Point,
    goal: Point,
    max_len: f64,
    next_hop: impl Fn(Cell) -> Option<Cell>,
) -> Result<Point, QueryError> {
    if s.dist(goal) <= map.goal_tolerance() {
        return Ok(Point::default());
    }
    if !map.segment_collides(s, goal) {
        return Ok((goal - s).clamp_norm(max_len));
    }
    let c = cell_of(grid, s)?;
    match next_hop(c) {
        Some(n) => Ok((grid.center(n) - s).clamp_norm(max_len)),
        None => Ok((goal - s).clamp_norm(max_len)),
    }
}

use std::sync::OnceLock;

use crate::dist::CategoricalDist;
use crate::env::MazeMap;
use crate::geometry::Point;
use crate::grid::{Cell, GridError, GridModel};

use super::{cell_of, greedy_action, QueryError, ValueBackend};

/// Exact grid shortest-path backend.
///
/// `-V(s, t)` is the 8-connected shortest-path length between the cells of
/// `s` and `t`. Per-cell distance windows are computed on first use.
/// `V_c(s, t)` rolls the greedy policy out from `s` and convolves the step
/// cost distributions of every hazard step it takes.
#[derive(Debug)]
pub struct OracleBackend {
    map: MazeMap,
    grid: GridModel,
    eta: f64,
    radius: usize,
    fields: Vec<OnceLock<Box<[f32]>>>,
}

impl OracleBackend {
    pub fn build(map: &MazeMap, grid_res: f64, eta: f64) -> Result<Self, GridError> {
        assert!(eta > 0.0 && eta.is_finite(), "eta must be positive");
        let grid = GridModel::new(map, grid_res)?;
        let radius = grid.window_radius(eta);
        let fields = (0..grid.len()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            map: map.clone(),
            grid,
            eta,
            radius,
            fields,
        })
    }

    pub(crate) fn from_parts(map: MazeMap, grid: GridModel, eta: f64, fields: Vec<Option<Box<[f32]>>>) -> Self {
        let radius = grid.window_radius(eta);
        let fields = fields
            .into_iter()
            .map(|f| {
                let cell = OnceLock::new();
                if let Some(f) = f {
                    let _ = cell.set(f);
                }
                cell
            })
            .collect();
        Self {
            map,
            grid,
            eta,
            radius,
            fields,
        }
    }

    /// Computes every distance window (used before writing a snapshot).
    pub(crate) fn all_fields(&self) -> Vec<Option<Box<[f32]>>> {
        (0..self.grid.len())
            .map(|c| self.grid.is_free(c).then(|| self.field(c).to_vec().into_boxed_slice()))
            .collect()
    }

    fn field(&self, c: Cell) -> &[f32] {
        self.fields[c].get_or_init(|| {
            // the slack keeps next-hop lookups around the locality edge exact
            let limit = self.eta + 2.0 * self.grid.res();
            self.grid.window_field(c, self.radius, limit).into_boxed_slice()
        })
    }

    fn cell_distance(&self, a: Cell, b: Cell) -> Result<f64, QueryError> {
        if !self.grid.same_component(a, b) {
            return Err(QueryError::Unreachable);
        }
        let d = self
            .grid
            .window_offset(a, b, self.radius)
            .map_or(f32::INFINITY, |off| self.field(a)[off]);
        if d.is_finite() && d as f64 <= self.eta {
            Ok(d as f64)
        } else {
            Err(QueryError::Locality { eta: self.eta })
        }
    }

    /// Neighbour of `c` on a shortest path to `goal`.
    fn next_hop(&self, c: Cell, goal: Cell) -> Option<Cell> {
        if c == goal {
            return None;
        }
        let field = self.field(goal);
        let mut best: Option<(f64, Cell)> = None;
        for (n, m) in self.grid.neighbors(c) {
            let Some(off) = self.grid.window_offset(goal, n, self.radius) else {
                continue;
            };
            let score = field[off] as f64 + self.grid.move_len(m);
            if score.is_finite() && best.is_none_or(|(b, _)| score < b) {
                best = Some((score, n));
            }
        }
        best.map(|(_, n)| n)
    }

    /// Per-hazard counts of greedy steps from `s` to `t` that end inside each hazard.
    pub fn hazard_counts(&self, s: Point, t: Point) -> Result<Vec<u32>, QueryError> {
        self.distance(s, t)?;
        let goal = cell_of(&self.grid, t)?;
        let step = self.map.step_len();
        let mut counts = vec![0u32; self.map.hazards().len()];
        let mut p = s;
        let max_steps = (4.0 * self.eta / step).ceil() as usize + 16;
        for _ in 0..max_steps {
            if !self.map.segment_collides(p, t) {
                for (c, k) in counts.iter_mut().zip(self.map.hazard_step_count(p, t, step)) {
                    *c += k;
                }
                break;
            }
            let Some(n) = cell_of(&self.grid, p).ok().and_then(|c| self.next_hop(c, goal)) else {
                break;
            };
            p = p + (self.grid.center(n) - p).clamp_norm(step);
            for (c, h) in counts.iter_mut().zip(self.map.hazards()) {
                if h.contains(p) {
                    *c += 1;
                }
            }
        }
        Ok(counts)
    }
}

impl ValueBackend for OracleBackend {
    fn map(&self) -> &MazeMap {
        &self.map
    }

    fn grid(&self) -> &GridModel {
        &self.grid
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    /// Octile path lengths between cell centres never undercut the straight line.
    fn center_slack(&self) -> f64 {
        0.0
    }

    fn distance(&self, s: Point, t: Point) -> Result<f64, QueryError> {
        let a = cell_of(&self.grid, s)?;
        let b = cell_of(&self.grid, t)?;
        self.cell_distance(a, b)
    }

    fn cost_dist(&self, s: Point, t: Point) -> Result<CategoricalDist, QueryError> {
        let counts = self.hazard_counts(s, t)?;
        Ok(self.map.cost_dist_for_counts(&counts))
    }

    fn local_policy(&self, s: Point, goal: Point) -> Result<Point, QueryError> {
        self.distance(s, goal)?;
        let g = cell_of(&self.grid, goal)?;
        greedy_action(&self.map, &self.grid, s, goal, self.map.a_max(), |c| {
            self.next_hop(c, g)
        })
    }
}

//! Tabular categorical distributional value iteration.
//!
//! For every goal cell `g` the distance-to-go distribution `Z(c, g)` of each
//! cell `c` in the locality window around `g` is a categorical vector over
//! atoms `0, delta, 2 delta, ...` (atom `i` stands for reward `-i delta`).
//! One synchronous sweep sets, for every cell,
//!
//! ```text
//! Q(c, g, a) = [1, 0, ..., 0]                   if next(c, a) = g
//!            = shift(Z(next(c, a), g), |a|)     otherwise
//! Z(c, g)    = Q(c, g, argmin_a E[Q(c, g, a)])
//! ```
//!
//! where `shift` is the accumulated right shift (fractional amounts, from
//! diagonal moves, are split linearly between neighbouring atoms). With a
//! full-support tabular target the KL projection onto the categorical
//! family is the identity, so each sweep assigns the target directly.
//! Sweeps stop once the largest per-pair KL between consecutive sweeps is
//! below tolerance and the greedy policy is stable. The cost-to-go
//! distribution of the resulting greedy policy is then evaluated by
//! convolving per-step hazard cost distributions along policy chains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{kl_slices, CategoricalDist, ConvolveMode};
use crate::env::MazeMap;
use crate::geometry::Point;
use crate::grid::{Cell, GridError, GridModel, MOVES, NO_MOVE};

use super::{cell_of, greedy_action, QueryError, ValueBackend, DEFAULT_ETA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularConfig {
    pub grid_res: f64,
    pub eta: f64,
    /// Reward atoms; defaults to one atom per map unit over `[-2 eta, 0]`.
    pub n_atoms: Option<usize>,
    pub kl_tolerance: f64,
    /// Defaults to a bound proportional to the window diameter.
    pub max_sweeps: Option<usize>,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            grid_res: 1.0,
            eta: DEFAULT_ETA,
            n_atoms: None,
            kl_tolerance: 1e-9,
            max_sweeps: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("value iteration for goal cell {goal} did not converge within {sweeps} sweeps")]
    NonConvergence { goal: Cell, sweeps: usize },
    #[error("invalid training config: {0}")]
    BadConfig(&'static str),
}

/// Convergence trace of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Largest number of sweeps any goal needed.
    pub sweeps: usize,
    /// Per sweep, the largest per-pair `KL(Z_new || Z_old)` over all goals.
    pub kl_history: Vec<f64>,
}

/// Equispaced atom grid shared by a family of distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportTemplate {
    pub v_min: f64,
    pub delta: f64,
    pub n_atoms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularBackend {
    #[serde(with = "crate::env::map_as_json")]
    map: MazeMap,
    grid: GridModel,
    eta: f64,
    radius: usize,
    reward_support: SupportTemplate,
    cost_support: SupportTemplate,
    /// Free cell -> row of the per-goal tables.
    goal_slot: Vec<u32>,
    /// Expected distance `-V`, goal-major over each goal's window.
    expected: Vec<f32>,
    policy: Vec<u8>,
    /// Index into `cost_table`; 0 is the zero-cost point mass.
    cost_index: Vec<u32>,
    cost_table: Vec<CategoricalDist>,
    report: TrainingReport,
}

const NO_SLOT: u32 = u32::MAX;

/// Everything learned for one goal cell.
pub(crate) struct GoalSolution {
    pub expected: Vec<f32>,
    pub policy: Vec<u8>,
    pub costs: Vec<Option<CategoricalDist>>,
    /// Converged distance-to-go vectors, flat `window x n_atoms`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub dists: Vec<f64>,
    pub kl_history: Vec<f64>,
}

struct Problem<'a> {
    grid: &'a GridModel,
    step_cost: &'a [Option<CategoricalDist>],
    radius: usize,
    n_atoms: usize,
    delta: f64,
    kl_tolerance: f64,
    max_sweeps: usize,
}

/// Expectation (in atom units) of `probs` shifted right by `amount` atoms with top clamping.
fn shifted_expectation(probs: &[f64], amount: f64) -> f64 {
    let n = probs.len();
    let top = (n - 1) as f64;
    let whole = amount.floor();
    let frac = amount - whole;
    let mut e = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let lo = (j as f64 + whole).min(top);
        let hi = (j as f64 + whole + 1.0).min(top);
        e += p * ((1.0 - frac) * lo + frac * hi);
    }
    e
}

fn shift_into(src: &[f64], amount: f64, out: &mut [f64]) {
    let n = src.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    let whole = amount.floor();
    let frac = amount - whole;
    let whole = whole as usize;
    for (j, &p) in src.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let lo = (j + whole).min(n - 1);
        if frac < 1e-12 {
            out[lo] += p;
        } else {
            let hi = (j + whole + 1).min(n - 1);
            out[lo] += p * (1.0 - frac);
            out[hi] += p * frac;
        }
    }
}

impl Problem<'_> {
    fn solve(&self, goal: Cell) -> Result<GoalSolution, TrainError> {
        let grid = self.grid;
        let side = 2 * self.radius + 1;
        let window = side * side;
        let n = self.n_atoms;
        let (gx, gy) = grid.coords(goal);
        let cells: Vec<Option<Cell>> = (0..window)
            .map(|off| {
                let ix = gx as i64 + (off % side) as i64 - self.radius as i64;
                let iy = gy as i64 + (off / side) as i64 - self.radius as i64;
                (ix >= 0 && iy >= 0 && (ix as usize) < grid.nx() && (iy as usize) < grid.ny())
                    .then(|| grid.index(ix as usize, iy as usize))
                    .filter(|&c| grid.is_free(c))
            })
            .collect();
        let goal_off = self.radius * side + self.radius;
        // neighbours inside the window: (offset, move, shift in atoms)
        let neighbours: Vec<Vec<(usize, u8, f64)>> = cells
            .iter()
            .map(|c| match c {
                None => Vec::new(),
                Some(c) => grid
                    .neighbors(*c)
                    .filter_map(|(nc, m)| {
                        grid.window_offset(goal, nc, self.radius)
                            .map(|off| (off, m as u8, grid.move_len(m) / self.delta))
                    })
                    .collect(),
            })
            .collect();

        let mut z = vec![0.0; window * n];
        for off in 0..window {
            if off == goal_off {
                z[off * n] = 1.0;
            } else {
                z[off * n + n - 1] = 1.0;
            }
        }
        let mut next = z.clone();
        let mut policy = vec![NO_MOVE; window];
        let mut kl_history = Vec::new();
        let mut converged = false;
        // a cell whose neighbours did not change last sweep keeps its value
        let mut changed = vec![true; window];
        let mut changed_next = vec![false; window];
        for _ in 0..self.max_sweeps {
            let mut max_kl = 0.0f64;
            let mut policy_changed = false;
            for off in 0..window {
                changed_next[off] = false;
                if cells[off].is_none() || off == goal_off {
                    continue;
                }
                if !neighbours[off].iter().any(|&(nb, ..)| changed[nb]) {
                    next[off * n..(off + 1) * n].copy_from_slice(&z[off * n..(off + 1) * n]);
                    continue;
                }
                let mut best: Option<(f64, usize, u8, f64)> = None;
                for &(nb, m, shift) in &neighbours[off] {
                    let e = if nb == goal_off {
                        0.0
                    } else {
                        shifted_expectation(&z[nb * n..(nb + 1) * n], shift)
                    };
                    if best.is_none_or(|(be, ..)| e < be - 1e-12) {
                        best = Some((e, nb, m, shift));
                    }
                }
                let out = &mut next[off * n..(off + 1) * n];
                match best {
                    None => {
                        out.iter_mut().for_each(|v| *v = 0.0);
                        out[n - 1] = 1.0;
                    }
                    Some((_, nb, m, shift)) => {
                        if nb == goal_off {
                            out.iter_mut().for_each(|v| *v = 0.0);
                            out[0] = 1.0;
                        } else {
                            shift_into(&z[nb * n..(nb + 1) * n], shift, out);
                        }
                        if policy[off] != m {
                            policy[off] = m;
                            policy_changed = true;
                        }
                    }
                }
                let (new, cur) = (&next[off * n..(off + 1) * n], &z[off * n..(off + 1) * n]);
                if new != cur {
                    changed_next[off] = true;
                    max_kl = max_kl.max(kl_slices(new, cur));
                }
            }
            std::mem::swap(&mut z, &mut next);
            std::mem::swap(&mut changed, &mut changed_next);
            kl_history.push(max_kl);
            if max_kl <= self.kl_tolerance && !policy_changed {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(TrainError::NonConvergence {
                goal,
                sweeps: self.max_sweeps,
            });
        }

        let mut expected = vec![f32::INFINITY; window];
        for off in 0..window {
            if cells[off].is_none() {
                continue;
            }
            let probs = &z[off * n..(off + 1) * n];
            if probs[n - 1] >= 1.0 {
                continue;
            }
            let e: f64 = probs.iter().enumerate().map(|(i, p)| p * i as f64).sum();
            expected[off] = (e * self.delta) as f32;
        }

        let costs = self.evaluate_costs(&cells, &expected, &policy, goal, goal_off);
        Ok(GoalSolution {
            expected,
            policy,
            costs,
            dists: z,
            kl_history,
        })
    }

    /// Cost-to-go of the greedy policy, evaluated along policy chains.
    fn evaluate_costs(
        &self,
        cells: &[Option<Cell>],
        expected: &[f32],
        policy: &[u8],
        goal: Cell,
        goal_off: usize,
    ) -> Vec<Option<CategoricalDist>> {
        let zero = CategoricalDist::point_mass(0.0, 1.0, 1, 0);
        let window = cells.len();
        let mut memo: Vec<Option<CategoricalDist>> = vec![None; window];
        memo[goal_off] = Some(zero.clone());
        let mut chain = Vec::new();
        for start in 0..window {
            if cells[start].is_none() || !expected[start].is_finite() || memo[start].is_some() {
                continue;
            }
            let mut off = start;
            chain.clear();
            while memo[off].is_none() && chain.len() <= window {
                chain.push(off);
                let c = cells[off].expect("chain stays on free cells");
                let nb = self
                    .grid
                    .step(c, policy[off] as usize)
                    .and_then(|nc| self.grid.window_offset(goal, nc, self.radius))
                    .expect("greedy move stays inside the window");
                off = nb;
            }
            let mut acc = memo[off].clone().unwrap_or_else(|| zero.clone());
            let mut entered = off;
            while let Some(o) = chain.pop() {
                let step = cells[entered].and_then(|c| self.step_cost[c].as_ref());
                if let Some(step) = step {
                    acc = acc
                        .convolve(step, ConvolveMode::Exact)
                        .expect("cost grids share spacing")
                        .trimmed();
                }
                memo[o] = Some(acc.clone());
                entered = o;
            }
        }
        memo.into_iter().map(|d| d.filter(|d| d.len() > 1)).collect()
    }
}

impl TabularBackend {
    /// Trains a backend over every free goal cell of `map`.
    pub fn train(map: &MazeMap, config: &TabularConfig) -> Result<Self, TrainError> {
        if !(config.eta.is_finite() && config.eta > 0.0) {
            return Err(TrainError::BadConfig("eta must be positive"));
        }
        if !(config.kl_tolerance >= 0.0) {
            return Err(TrainError::BadConfig("kl_tolerance must be nonnegative"));
        }
        let grid = GridModel::new(map, config.grid_res)?;
        let radius = grid.window_radius(config.eta);
        let v_max = 2.0 * config.eta;
        let n_atoms = config.n_atoms.unwrap_or(v_max.round() as usize + 1);
        if n_atoms < 2 {
            return Err(TrainError::BadConfig("need at least two reward atoms"));
        }
        let delta = v_max / (n_atoms - 1) as f64;
        let max_sweeps = config.max_sweeps.unwrap_or(8 * radius + 32);
        let step_cost = Self::step_costs(map, &grid);

        let problem = Problem {
            grid: &grid,
            step_cost: &step_cost,
            radius,
            n_atoms,
            delta,
            kl_tolerance: config.kl_tolerance,
            max_sweeps,
        };
        let goals: Vec<Cell> = grid.free_cells().collect();
        let solutions: Vec<GoalSolution> = goals.par_iter().map(|&g| problem.solve(g)).collect::<Result<_, _>>()?;

        let side = 2 * radius + 1;
        let window = side * side;
        let mut goal_slot = vec![NO_SLOT; grid.len()];
        let mut expected = Vec::with_capacity(goals.len() * window);
        let mut policy = Vec::with_capacity(goals.len() * window);
        let mut cost_index = Vec::with_capacity(goals.len() * window);
        let mut cost_table = vec![CategoricalDist::point_mass(0.0, 1.0, 1, 0)];
        let mut kl_history: Vec<f64> = Vec::new();
        let mut sweeps = 0;
        let mut max_cost_atoms = 1;
        for (slot, (g, sol)) in goals.iter().zip(solutions).enumerate() {
            goal_slot[*g] = slot as u32;
            expected.extend_from_slice(&sol.expected);
            policy.extend_from_slice(&sol.policy);
            for c in sol.costs {
                match c {
                    None => cost_index.push(0),
                    Some(d) => {
                        max_cost_atoms = max_cost_atoms.max(d.len());
                        cost_index.push(cost_table.len() as u32);
                        cost_table.push(d);
                    }
                }
            }
            sweeps = sweeps.max(sol.kl_history.len());
            for (i, kl) in sol.kl_history.iter().enumerate() {
                if i == kl_history.len() {
                    kl_history.push(0.0);
                }
                kl_history[i] = kl_history[i].max(*kl);
            }
        }
        Ok(Self {
            map: map.clone(),
            grid,
            eta: config.eta,
            radius,
            reward_support: SupportTemplate {
                v_min: -v_max,
                delta,
                n_atoms,
            },
            cost_support: SupportTemplate {
                v_min: 0.0,
                delta: 1.0,
                n_atoms: max_cost_atoms,
            },
            goal_slot,
            expected,
            policy,
            cost_index,
            cost_table,
            report: TrainingReport { sweeps, kl_history },
        })
    }

    fn step_costs(map: &MazeMap, grid: &GridModel) -> Vec<Option<CategoricalDist>> {
        (0..grid.len())
            .map(|c| {
                let centre = grid.center(c);
                let mut acc: Option<CategoricalDist> = None;
                for h in map.hazards().iter().filter(|h| h.contains(centre)) {
                    let step = h.cost.step_dist();
                    acc = Some(match acc {
                        None => step,
                        Some(a) => a.convolve(&step, ConvolveMode::Exact).expect("unit cost grid"),
                    });
                }
                acc
            })
            .collect()
    }

    pub fn report(&self) -> &TrainingReport {
        &self.report
    }

    pub fn reward_support(&self) -> SupportTemplate {
        self.reward_support
    }

    pub fn cost_support(&self) -> SupportTemplate {
        self.cost_support
    }

    fn entry(&self, s: Point, t: Point) -> Result<(usize, Cell, Cell), QueryError> {
        let c = cell_of(&self.grid, s)?;
        let g = cell_of(&self.grid, t)?;
        if !self.grid.same_component(c, g) {
            return Err(QueryError::Unreachable);
        }
        let slot = self.goal_slot[g];
        let side = 2 * self.radius + 1;
        let off = self
            .grid
            .window_offset(g, c, self.radius)
            .ok_or(QueryError::Locality { eta: self.eta })?;
        let idx = slot as usize * side * side + off;
        let e = self.expected[idx];
        if !(e.is_finite() && e as f64 <= self.eta) {
            return Err(QueryError::Locality { eta: self.eta });
        }
        Ok((idx, c, g))
    }

    /// Greedy move index of the learned policy at `s` toward `t`.
    pub fn policy_move(&self, s: Point, t: Point) -> Result<Option<usize>, QueryError> {
        let (idx, ..) = self.entry(s, t)?;
        let m = self.policy[idx];
        Ok((m != NO_MOVE).then_some(m as usize))
    }

    #[cfg(test)]
    pub(crate) fn solve_single_goal(
        map: &MazeMap,
        config: &TabularConfig,
        goal: Point,
    ) -> Result<(GridModel, GoalSolution, usize), TrainError> {
        let grid = GridModel::new(map, config.grid_res)?;
        let radius = grid.window_radius(config.eta);
        let v_max = 2.0 * config.eta;
        let n_atoms = config.n_atoms.unwrap_or(v_max.round() as usize + 1);
        let step_cost = Self::step_costs(map, &grid);
        let problem = Problem {
            grid: &grid,
            step_cost: &step_cost,
            radius,
            n_atoms,
            delta: v_max / (n_atoms - 1) as f64,
            kl_tolerance: config.kl_tolerance,
            max_sweeps: config.max_sweeps.unwrap_or(8 * radius + 32),
        };
        let g = grid.cell_at(goal).expect("goal inside the grid");
        let sol = problem.solve(g)?;
        Ok((grid, sol, n_atoms))
    }
}

impl ValueBackend for TabularBackend {
    fn map(&self) -> &MazeMap {
        &self.map
    }

    fn grid(&self) -> &GridModel {
        &self.grid
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    /// The goal move is free, so `-V` undercuts the octile length by at most one diagonal.
    fn center_slack(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.grid.res()
    }

    fn distance(&self, s: Point, t: Point) -> Result<f64, QueryError> {
        let (idx, ..) = self.entry(s, t)?;
        Ok(self.expected[idx] as f64)
    }

    fn cost_dist(&self, s: Point, t: Point) -> Result<CategoricalDist, QueryError> {
        let (idx, ..) = self.entry(s, t)?;
        Ok(self.cost_table[self.cost_index[idx] as usize].clone())
    }

    fn local_policy(&self, s: Point, goal: Point) -> Result<Point, QueryError> {
        let (_, _, g) = self.entry(s, goal)?;
        let side = 2 * self.radius + 1;
        let slot = self.goal_slot[g] as usize;
        greedy_action(&self.map, &self.grid, s, goal, self.map.a_max(), |c| {
            let off = self.grid.window_offset(g, c, self.radius)?;
            let m = self.policy[slot * side * side + off];
            (m != NO_MOVE && (m as usize) < MOVES.len())
                .then(|| self.grid.step(c, m as usize))
                .flatten()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::CostModel;
    use crate::geometry::Rect;

    fn small() -> MazeMap {
        MazeMap::builder("small", Rect::new(0.0, 0.0, 12.0, 12.0))
            .wall(Rect::new(5.0, 0.0, 6.0, 8.0))
            .hazard(Point::new(2.5, 10.5), 1.2, CostModel::Static { value: 1.0 })
            .build()
            .unwrap()
    }

    fn cfg() -> TabularConfig {
        TabularConfig {
            eta: 8.0,
            ..TabularConfig::default()
        }
    }

    #[test]
    fn goal_adjacent_q_is_a_point_mass_at_the_first_atom() {
        let map = small();
        let goal = Point::new(2.5, 2.5);
        let (grid, sol, n) = TabularBackend::solve_single_goal(&map, &cfg(), goal).unwrap();
        let g = grid.cell_at(goal).unwrap();
        let radius = grid.window_radius(8.0);
        let adj = grid.step(g, 0).unwrap();
        let off = grid.window_offset(g, adj, radius).unwrap();
        let z = &sol.dists[off * n..(off + 1) * n];
        assert_eq!(z[0], 1.0);
        assert!(z[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn corridor_distance_close_to_the_grid_distance() {
        let map = small();
        let b = TabularBackend::train(&map, &cfg()).unwrap();
        let d = b.distance(Point::new(1.5, 4.5), Point::new(4.5, 4.5)).unwrap();
        assert!((d - 3.0).abs() <= 1.0, "d = {d}");
    }

    #[test]
    fn hazard_steps_accumulate_in_the_cost_distribution() {
        let map = MazeMap::builder("strip", Rect::new(0.0, 0.0, 12.0, 3.0))
            .hazard(Point::new(5.5, 1.5), 1.2, CostModel::Static { value: 1.0 })
            .build()
            .unwrap();
        let b = TabularBackend::train(&map, &cfg()).unwrap();
        // cells 4, 5, 6 in the middle row have centres inside the disk
        let c = b.cost_dist(Point::new(1.5, 1.5), Point::new(9.5, 1.5)).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.probs()[3], 1.0);
        let none = b.cost_dist(Point::new(1.5, 0.5), Point::new(2.5, 0.5)).unwrap();
        assert_eq!(none.probs(), &[1.0]);
    }

    #[test]
    fn training_reports_converged_sweeps() {
        let b = TabularBackend::train(&small(), &cfg()).unwrap();
        let r = b.report();
        assert!(r.sweeps >= 2);
        assert!(*r.kl_history.last().unwrap() <= 1e-9);
    }

    #[test]
    fn too_few_sweeps_is_an_error() {
        let c = TabularConfig {
            max_sweeps: Some(2),
            ..cfg()
        };
        assert!(matches!(
            TabularBackend::train(&small(), &c),
            Err(TrainError::NonConvergence { .. })
        ));
    }
}

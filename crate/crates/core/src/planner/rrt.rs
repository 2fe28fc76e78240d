use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstar::primitives::GeomWithData;
use rstar::RTree;

use crate::dist::CategoricalDist;
use crate::geometry::Point;
use crate::lower::ValueBackend;

use super::sampling::{gamma_lower_bound, informed_sample, rewiring_radius, steer};
use super::tree::{convolve_capped, NodeId, PlanTree};
use super::{PathSolution, PlanError, PlannerConfig, AUTO_GAMMA_FACTOR, STATE_DIM};

/// Node id and its exact state.
type Entry = GeomWithData<[f64; 2], (NodeId, Point)>;

/// Tree nodes indexed by the centre of their grid cell. Backend distances
/// never fall more than `slack` below the distance between those centres,
/// so Euclidean candidates can be enumerated in order and re-ranked by the
/// backend.
struct SpatialIndex {
    tree: RTree<Entry>,
    slack: f64,
}

impl SpatialIndex {
    fn new(backend: &dyn ValueBackend) -> Self {
        Self {
            tree: RTree::new(),
            // covers f32 rounding in stored distances
            slack: backend.center_slack() + 1e-4,
        }
    }

    fn key(backend: &dyn ValueBackend, p: Point) -> [f64; 2] {
        let grid = backend.grid();
        let c = grid.cell_at(p).map_or(p, |c| grid.center(c));
        [c.x, c.y]
    }

    fn insert(&mut self, backend: &dyn ValueBackend, p: Point, id: NodeId) {
        self.tree.insert(GeomWithData::new(Self::key(backend, p), (id, p)));
    }

    fn occupied(&self, backend: &dyn ValueBackend, p: Point) -> bool {
        self.tree
            .locate_all_at_point(&Self::key(backend, p))
            .any(|e| e.data.1.dist(p) < 1e-9)
    }

    /// Node minimizing `-V(node, x)`, or the node with the closest cell
    /// centre when no node is local to `x`.
    fn nearest(&self, x: Point, eta: f64, backend: &dyn ValueBackend) -> NodeId {
        let mut fallback = None;
        let mut best: Option<(f64, NodeId)> = None;
        for (e, d2) in self.tree.nearest_neighbor_iter_with_distance_2(&Self::key(backend, x)) {
            let (id, state) = e.data;
            fallback.get_or_insert(id);
            let bound = best.map_or(eta, |(b, _)| b.min(eta));
            if d2.sqrt() - self.slack > bound {
                break;
            }
            if let Ok(v) = backend.distance(state, x) {
                if best.is_none_or(|(b, bid)| v < b || (v == b && id < bid)) {
                    best = Some((v, id));
                }
            }
        }
        best.map(|(_, id)| id).or(fallback).expect("tree is never empty")
    }

    /// Nodes with `-V(node, x) <= radius`, sorted by id, with their distances.
    fn near(&self, x: Point, radius: f64, backend: &dyn ValueBackend) -> Vec<(NodeId, f64)> {
        let reach = radius + self.slack;
        let mut found: Vec<(NodeId, Point)> = self
            .tree
            .locate_within_distance(Self::key(backend, x), reach * reach)
            .map(|e| e.data)
            .collect();
        found.sort_unstable_by_key(|e| e.0);
        found
            .into_iter()
            .filter_map(|(id, state)| {
                backend
                    .distance(state, x)
                    .ok()
                    .filter(|&v| v <= radius)
                    .map(|v| (id, v))
            })
            .collect()
    }
}

/// Result of a planner run.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub tree: PlanTree,
    /// Maximum-reward member of the solution set.
    pub best: Option<PathSolution>,
    /// Every validated path snapshot, in discovery order.
    pub solutions: Vec<PathSolution>,
    /// Best solution reward after each iteration (`-inf` before the first).
    pub best_history: Vec<f64>,
    pub gamma: f64,
}

/// Cumulative cost through `parent` plus `edge_cost`, if it satisfies the constraint.
fn extend_if_valid(
    tree: &mut PlanTree,
    parent: NodeId,
    edge_cost: &CategoricalDist,
    cfg: &PlannerConfig,
) -> Option<CategoricalDist> {
    let cum = convolve_capped(&tree.cumulative_cost(parent), edge_cost, tree.cost_atoms());
    if !cfg.is_constrained() {
        return Some(cum);
    }
    let cvar = cum.cvar_alpha(cfg.alpha).expect("alpha validated");
    (cvar <= cfg.k).then_some(cum)
}

/// Whether the edge from node `s` to `s_prime` keeps the accumulated cost
/// of the partial path within the CVaR constraint. Non-local pairs are invalid.
pub fn valid_edge(
    tree: &mut PlanTree,
    s: NodeId,
    s_prime: Point,
    backend: &dyn ValueBackend,
    cfg: &PlannerConfig,
) -> bool {
    match backend.cost_dist(tree.node(s).state, s_prime) {
        Ok(c) => extend_if_valid(tree, s, &c, cfg).is_some(),
        Err(_) => false,
    }
}

/// Runs constrained informed RRT* from `start` toward `goal`.
pub fn plan(
    backend: &dyn ValueBackend,
    start: Point,
    goal: Point,
    cfg: &PlannerConfig,
) -> Result<PlanOutcome, PlanError> {
    cfg.validate()?;
    let map = backend.map();
    if !map.is_free(start) || backend.grid().cell_at(start).is_none() {
        return Err(PlanError::BadStart(start));
    }
    if !map.is_free(goal) || backend.grid().cell_at(goal).is_none() {
        return Err(PlanError::BadGoal(goal));
    }
    let eta = cfg.eta.unwrap_or(backend.eta()).min(backend.eta());
    let gamma = cfg
        .gamma
        .unwrap_or_else(|| AUTO_GAMMA_FACTOR * gamma_lower_bound(STATE_DIM, map.free_area()));
    let goal_radius = cfg.goal_radius.unwrap_or(map.goal_tolerance());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut tree = PlanTree::new(start, cfg.cost_atoms);
    let mut index = SpatialIndex::new(backend);
    index.insert(backend, start, 0);

    let mut solutions: Vec<PathSolution> = Vec::new();
    let mut best: Option<usize> = None;
    // reward at the last snapshot of each goal node, aligned with `solution_nodes`
    let mut snapshot_reward: Vec<f64> = Vec::new();
    let mut best_history = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        grow(
            backend,
            &mut tree,
            &mut index,
            &mut rng,
            start,
            goal,
            goal_radius,
            eta,
            gamma,
            cfg,
            best.map(|b| solutions[b].length()),
        );

        // register new goal nodes and re-form paths whose reward improved
        snapshot_reward.resize(tree.solution_nodes.len(), f64::NEG_INFINITY);
        for (i, &g) in tree.solution_nodes.iter().enumerate() {
            let r = tree.node(g).reward;
            if r <= snapshot_reward[i] + 1e-9 {
                continue;
            }
            snapshot_reward[i] = r;
            let waypoints: Vec<Point> = tree.path_to(g).into_iter().map(|n| tree.node(n).state).collect();
            let Ok(sol) = PathSolution::evaluate(backend, waypoints, cfg.alpha) else {
                continue;
            };
            if cfg.is_constrained() && !(sol.cvar_certificate <= cfg.k) {
                continue;
            }
            if best.is_none_or(|b| sol.r_sigma > solutions[b].r_sigma) {
                best = Some(solutions.len());
            }
            solutions.push(sol);
        }
        best_history.push(best.map_or(f64::NEG_INFINITY, |b| solutions[b].r_sigma));

        if cfg.debug_checks {
            if let Err(e) = tree.check_invariants() {
                panic!("tree invariant violated: {e}");
            }
        }
    }

    Ok(PlanOutcome {
        best: best.map(|b| solutions[b].clone()),
        tree,
        solutions,
        best_history,
        gamma,
    })
}

/// One iteration of the tree-growing loop.
#[allow(clippy::too_many_arguments)]
fn grow(
    backend: &dyn ValueBackend,
    tree: &mut PlanTree,
    index: &mut SpatialIndex,
    rng: &mut ChaCha8Rng,
    start: Point,
    goal: Point,
    goal_radius: f64,
    eta: f64,
    gamma: f64,
    cfg: &PlannerConfig,
    best_len: Option<f64>,
) {
    let radius = rewiring_radius(tree.len().max(2) as f64, STATE_DIM, gamma).expect("n >= 2");
    let cap = radius.min(eta);
    let s_rand = if rng.gen::<f64>() < cfg.goal_bias {
        goal
    } else {
        informed_sample(start, goal, best_len.unwrap_or(f64::INFINITY), backend.map(), rng)
    };
    let nearest = index.nearest(s_rand, eta, backend);
    let Some(s_new) = steer(tree.node(nearest).state, s_rand, cap, backend) else {
        return;
    };
    if backend.grid().cell_at(s_new).is_none() || index.occupied(backend, s_new) {
        return;
    }

    let edge_cost = |from: Point, to: Point| -> Option<CategoricalDist> {
        if cfg.is_constrained() {
            backend.cost_dist(from, to).ok()
        } else {
            Some(super::tree::zero_cost())
        }
    };

    let from = tree.node(nearest).state;
    let Some((len, cost)) = backend.distance(from, s_new).ok().zip(edge_cost(from, s_new)) else {
        return;
    };
    let Some(cum) = extend_if_valid(tree, nearest, &cost, cfg) else {
        return;
    };
    let near = index.near(s_new, cap, backend);

    let mut s_min = (nearest, len, cost, cum);
    let mut c_min = tree.node(nearest).reward - len;
    for &(id, v) in &near {
        if id == nearest || tree.node(id).reward - v <= c_min {
            continue;
        }
        let Some(c) = edge_cost(tree.node(id).state, s_new) else {
            continue;
        };
        if let Some(cum) = extend_if_valid(tree, id, &c, cfg) {
            c_min = tree.node(id).reward - v;
            s_min = (id, v, c, cum);
        }
    }

    let (parent, len, cost, cum) = s_min;
    let new_id = tree.add(parent, s_new, len, cost);
    tree.set_cumulative_cost(new_id, cum);
    index.insert(backend, s_new, new_id);

    for &(id, _) in &near {
        if id == parent {
            continue;
        }
        let state = tree.node(id).state;
        let Ok(v) = backend.distance(s_new, state) else {
            continue;
        };
        // the cost walk is the expensive part, so only pay for it on an improving rewire
        if tree.node(new_id).reward - v <= tree.node(id).reward + 1e-12 {
            continue;
        }
        let Some(c) = edge_cost(s_new, state) else {
            continue;
        };
        if extend_if_valid(tree, new_id, &c, cfg).is_some() {
            tree.reparent(id, new_id, v, c);
        }
    }

    if s_new.dist(goal) <= goal_radius {
        tree.solution_nodes.push(new_id);
    }
}

/// Informed RRT* without a cost constraint (`K = inf`, `alpha = 1`).
pub fn plan_unconstrained(
    backend: &dyn ValueBackend,
    start: Point,
    goal: Point,
    cfg: &PlannerConfig,
) -> Result<PlanOutcome, PlanError> {
    let cfg = PlannerConfig {
        k: f64::INFINITY,
        alpha: 1.0,
        ..cfg.clone()
    };
    plan(backend, start, goal, &cfg)
}

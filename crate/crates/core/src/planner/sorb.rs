use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::uniform_free_point;
use crate::geometry::Point;
use crate::lower::ValueBackend;

use super::PathSolution;

/// Complete graph over sampled states, weighted by backend distance.
/// Node 0 is the start and node 1 the goal.
#[derive(Debug, Clone)]
pub struct SorbGraph {
    pub states: Vec<Point>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SorbGraph {
    /// Samples `n_nodes` free states and evaluates every ordered pair.
    pub fn build(
        backend: &dyn ValueBackend,
        start: Point,
        goal: Point,
        n_nodes: usize,
        edge_cap: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = vec![start, goal];
        states.extend((0..n_nodes).map(|_| uniform_free_point(backend.map(), &mut rng)));
        let adjacency = states
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                states
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .filter_map(|(j, &b)| backend.distance(a, b).ok().filter(|&d| d <= edge_cap).map(|d| (j, d)))
                    .collect()
            })
            .collect();
        Self { states, adjacency }
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Dijkstra from node 0 to node 1; node ids of the shortest path.
    pub fn shortest_path(&self) -> Option<Vec<usize>> {
        let n = self.states.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[0] = 0.0;
        heap.push(Frontier(0.0, 0));
        while let Some(Frontier(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == 1 {
                break;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                    heap.push(Frontier(nd, v));
                }
            }
        }
        if !dist[1].is_finite() {
            return None;
        }
        let mut path = vec![1];
        while *path.last().unwrap() != 0 {
            path.push(prev[*path.last().unwrap()]);
        }
        path.reverse();
        Some(path)
    }
}

/// Shortest path over a complete graph of `n_nodes` uniform samples plus
/// the endpoints, ignoring cost. The returned certificate is computed at
/// `alpha` for reporting only.
pub fn sorb_plan(
    backend: &dyn ValueBackend,
    start: Point,
    goal: Point,
    n_nodes: usize,
    edge_cap: f64,
    alpha: f64,
    seed: u64,
) -> Option<PathSolution> {
    assert!(n_nodes >= 2, "SORB needs at least two sampled nodes");
    let graph = SorbGraph::build(backend, start, goal, n_nodes, edge_cap, seed);
    let path = graph.shortest_path()?;
    let waypoints = path.into_iter().map(|i| graph.states[i]).collect();
    PathSolution::evaluate(backend, waypoints, alpha).ok()
}

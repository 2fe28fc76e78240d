use serde::{Deserialize, Serialize};

use crate::dist::{CategoricalDist, ConvolveMode};
use crate::geometry::Point;

pub type NodeId = usize;

#[derive(Debug, Clone, Serialize)]
pub struct Node {
    pub state: Point,
    pub parent: Option<NodeId>,
    /// Cumulative reward from the root (negated path length).
    pub reward: f64,
    /// `-V(parent, self)`.
    pub edge_len: f64,
    /// `V_c(parent, self)`; a point mass at zero for the root.
    #[serde(skip)]
    pub edge_cost: CategoricalDist,
    #[serde(skip)]
    pub children: Vec<NodeId>,
}

/// Planner search tree. Node 0 is the root.
#[derive(Debug, Clone, Serialize)]
pub struct PlanTree {
    nodes: Vec<Node>,
    /// Nodes that landed in the goal region, in insertion order.
    pub solution_nodes: Vec<NodeId>,
    #[serde(skip)]
    cum_cost: Vec<Option<CategoricalDist>>,
    #[serde(skip)]
    cost_atoms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

pub(crate) fn zero_cost() -> CategoricalDist {
    CategoricalDist::point_mass(0.0, 1.0, 1, 0)
}

/// Convolution clamped at `cap` atoms; exact while the support fits.
pub(crate) fn convolve_capped(a: &CategoricalDist, b: &CategoricalDist, cap: usize) -> CategoricalDist {
    let n = (a.len() + b.len() - 1).min(cap.max(1));
    a.convolve(b, ConvolveMode::Clamped(n))
        .expect("cost supports share spacing")
}

impl PlanTree {
    pub fn new(root: Point, cost_atoms: usize) -> Self {
        Self {
            nodes: vec![Node {
                state: root,
                parent: None,
                reward: 0.0,
                edge_len: 0.0,
                edge_cost: zero_cost(),
                children: Vec::new(),
            }],
            solution_nodes: Vec::new(),
            cum_cost: vec![Some(zero_cost())],
            cost_atoms,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn add(&mut self, parent: NodeId, state: Point, edge_len: f64, edge_cost: CategoricalDist) -> NodeId {
        let id = self.nodes.len();
        let reward = self.nodes[parent].reward - edge_len;
        self.nodes.push(Node {
            state,
            parent: Some(parent),
            reward,
            edge_len,
            edge_cost,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        self.cum_cost.push(None);
        id
    }

    /// Moves `id` under `new_parent`, updating rewards in its subtree and
    /// dropping the cumulative-cost memo of every node in it.
    pub fn reparent(&mut self, id: NodeId, new_parent: NodeId, edge_len: f64, edge_cost: CategoricalDist) {
        assert_ne!(id, 0, "the root has no parent");
        let old = self.nodes[id].parent.expect("non-root node");
        self.nodes[old].children.retain(|&c| c != id);
        self.nodes[new_parent].children.push(id);
        let node = &mut self.nodes[id];
        node.parent = Some(new_parent);
        node.edge_len = edge_len;
        node.edge_cost = edge_cost;
        let delta = self.nodes[new_parent].reward - edge_len - self.nodes[id].reward;
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            self.nodes[n].reward += delta;
            self.cum_cost[n] = None;
            stack.extend(self.nodes[n].children.iter().copied());
        }
    }

    /// Cumulative cost distribution from the root to `id` (memoized).
    pub fn cumulative_cost(&mut self, id: NodeId) -> CategoricalDist {
        let mut chain = Vec::new();
        let mut n = id;
        while self.cum_cost[n].is_none() {
            chain.push(n);
            n = self.nodes[n].parent.expect("root memo is always set");
        }
        let mut acc = self.cum_cost[n].clone().expect("memo present");
        for &c in chain.iter().rev() {
            acc = convolve_capped(&acc, &self.nodes[c].edge_cost, self.cost_atoms);
            self.cum_cost[c] = Some(acc.clone());
        }
        acc
    }

    pub(crate) fn set_cumulative_cost(&mut self, id: NodeId, cost: CategoricalDist) {
        self.cum_cost[id] = Some(cost);
    }

    pub fn cost_atoms(&self) -> usize {
        self.cost_atoms
    }

    /// Cumulative cost recomputed by walking parent links, without the memo.
    pub fn cumulative_cost_walk(&self, id: NodeId) -> CategoricalDist {
        let mut acc = zero_cost();
        let mut n = id;
        while let Some(p) = self.nodes[n].parent {
            acc = convolve_capped(&acc, &self.nodes[n].edge_cost, self.cost_atoms);
            n = p;
        }
        acc
    }

    /// Node ids from the root to `id`.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut n = id;
        while let Some(p) = self.nodes[n].parent {
            path.push(p);
            n = p;
        }
        path.reverse();
        path
    }

    pub fn edges(&self) -> Vec<TreeEdge> {
        self.nodes
            .iter()
            .filter_map(|n| {
                n.parent.map(|p| TreeEdge {
                    from: [self.nodes[p].state.x, self.nodes[p].state.y],
                    to: [n.state.x, n.state.y],
                })
            })
            .collect()
    }

    /// Checks the structural invariants: one root, acyclic parent links,
    /// consistent child lists, the reward recurrence and the cost memo.
    pub fn check_invariants(&self) -> Result<(), String> {
        let roots = self.nodes.iter().filter(|n| n.parent.is_none()).count();
        if roots != 1 || self.nodes[0].parent.is_some() || self.nodes[0].reward != 0.0 {
            return Err("tree must have node 0 as its only root with R = 0".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            let mut n = id;
            let mut hops = 0;
            while let Some(p) = self.nodes[n].parent {
                n = p;
                hops += 1;
                if hops > self.nodes.len() {
                    return Err(format!("cycle through node {id}"));
                }
            }
            if let Some(p) = node.parent {
                if !self.nodes[p].children.contains(&id) {
                    return Err(format!("node {id} missing from its parent's children"));
                }
                let expected = self.nodes[p].reward - node.edge_len;
                if (node.reward - expected).abs() > 1e-9 {
                    return Err(format!("reward recurrence broken at node {id}"));
                }
            }
            if let Some(memo) = &self.cum_cost[id] {
                let walk = self.cumulative_cost_walk(id);
                let same = memo.len() == walk.len()
                    && memo
                        .probs()
                        .iter()
                        .zip(walk.probs())
                        .all(|(a, b)| (a - b).abs() <= 1e-9);
                if !same {
                    return Err(format!("stale cost memo at node {id}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(k: usize) -> CategoricalDist {
        CategoricalDist::point_mass(0.0, 1.0, k + 1, k)
    }

    #[test]
    fn reward_recurrence_and_memo_follow_reparenting() {
        let mut t = PlanTree::new(Point::new(0.0, 0.0), 64);
        let a = t.add(0, Point::new(1.0, 0.0), 1.0, pm(2));
        let b = t.add(a, Point::new(2.0, 0.0), 1.0, pm(3));
        let c = t.add(b, Point::new(3.0, 0.0), 1.0, pm(0));
        assert_eq!(t.cumulative_cost(c).expectation(), 5.0);
        assert_eq!(t.node(c).reward, -3.0);
        t.reparent(b, 0, 1.5, pm(1));
        assert_eq!(t.node(c).reward, -2.5);
        assert_eq!(t.cumulative_cost(c).expectation(), 1.0);
        t.check_invariants().unwrap();
        assert_eq!(t.path_to(c), vec![0, b, c]);
        assert_eq!(t.edges().len(), 3);
    }

    #[test]
    fn capped_convolution_pools_overflow() {
        let d = convolve_capped(&pm(5), &pm(5), 8);
        assert_eq!(d.len(), 8);
        assert_eq!(d.probs()[7], 1.0);
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MazeMap;
use crate::geometry::Point;

/// Distance kept from a wall after a blocked move.
pub const CONTACT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
    /// True when the episode ended because the goal was reached.
    pub reached: bool,
}

/// One running episode. Each episode owns its cost-sampling stream.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    position: Point,
    goal: Point,
    step_count: usize,
    horizon: usize,
    rng: ChaCha8Rng,
}

impl EpisodeState {
    pub fn new(map: &MazeMap, start: Point, goal: Point, horizon: usize, seed: u64) -> Self {
        assert!(map.is_free(start), "start must lie in free space");
        assert!(horizon > 0, "horizon must be positive");
        Self {
            position: start,
            goal,
            step_count: 0,
            horizon,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn goal(&self) -> Point {
        self.goal
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn at_goal(&self, map: &MazeMap) -> bool {
        self.position.dist(self.goal) <= map.goal_tolerance()
    }

    pub fn is_done(&self, map: &MazeMap) -> bool {
        self.at_goal(map) || self.step_count >= self.horizon
    }

    /// Applies `action` (clipped to `a_max`). The agent moves along the
    /// straight segment and stops just short of the first wall or bound it
    /// touches. Reward is always -1; cost is drawn from every hazard that
    /// contains the resulting position.
    pub fn step(&mut self, map: &MazeMap, action: Point) -> StepOutcome {
        debug_assert!(self.step_count < self.horizon, "stepping a finished episode");
        let action = if action.is_finite() {
            action.clamp_norm(map.a_max())
        } else {
            Point::default()
        };
        let from = self.position;
        let target = from + action;
        let len = action.norm();
        let mut next = match map.first_contact(from, target) {
            None => target,
            Some(t) => from.lerp(target, (t - CONTACT_EPS / len.max(1e-300)).max(0.0)),
        };
        if !map.is_free(next) || (next != from && map.segment_collides(from, next)) {
            next = from;
        }
        self.position = next;
        self.step_count += 1;
        let cost = map.sample_cost(next, &mut self.rng);
        let reached = self.at_goal(map);
        StepOutcome {
            reward: -1.0,
            cost,
            done: reached || self.step_count >= self.horizon,
            reached,
        }
    }
}

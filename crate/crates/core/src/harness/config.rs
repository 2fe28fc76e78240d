use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;
use crate::lower::DEFAULT_ETA;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Constrained informed RRT* guiding the lower-level policy.
    Cop,
    /// Complete-graph shortest path, no constraint.
    Sorb,
    /// Lower-level policy aimed straight at the goal, no planner.
    Grl,
    /// Informed RRT* with the constraint removed.
    RrtstarUnconstrained,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cop => "cop",
            Algorithm::Sorb => "sorb",
            Algorithm::Grl => "grl",
            Algorithm::RrtstarUnconstrained => "rrtstar_unconstrained",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Cop, Self::Sorb, Self::Grl, Self::RrtstarUnconstrained]
            .into_iter()
            .find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Oracle,
    Tabular,
}

/// How start/goal pairs are drawn for each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StartGoalMode {
    /// Goal at shortest-path distance `69 * difficulty` from a uniform start.
    Difficulty,
    /// Start and goal uniform over the free part of two rectangles.
    Regions { start: Rect, goal: Rect },
}

fn default_alpha() -> Vec<f64> {
    vec![1.0]
}

fn default_k() -> Vec<Option<f64>> {
    vec![None]
}

fn default_trials() -> usize {
    100
}

fn default_iterations() -> usize {
    1000
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

fn default_grid_res() -> f64 {
    1.0
}

fn default_mode() -> StartGoalMode {
    StartGoalMode::Difficulty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Map file, relative to the config file when loaded from disk.
    pub map: PathBuf,
    pub algorithms: Vec<Algorithm>,
    pub backend: BackendKind,
    /// Optional pre-built backend snapshot; overrides `backend`.
    #[serde(default)]
    pub backend_snapshot: Option<PathBuf>,
    /// Cost limits; `null` means unconstrained.
    #[serde(default = "default_k")]
    pub k: Vec<Option<f64>>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    /// Difficulty levels; only used in `difficulty` mode.
    #[serde(default)]
    pub difficulty: Vec<f64>,
    #[serde(default = "default_mode")]
    pub start_goal: StartGoalMode,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_iterations")]
    pub sorb_nodes: usize,
    /// Episode horizon; derived from the difficulty when absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_grid_res")]
    pub grid_res: f64,
}

impl ExperimentConfig {
    /// Reads a JSON config and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.map = base.join(&cfg.map);
        if let Some(s) = cfg.backend_snapshot.take() {
            cfg.backend_snapshot = Some(base.join(s));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.k.is_empty() || self.alpha.is_empty() {
            return bad("K and alpha lists must be nonempty");
        }
        if self.k.iter().flatten().any(|k| !(*k >= 0.0)) {
            return bad("K values must be nonnegative");
        }
        if self.alpha.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return bad("alpha values must lie in (0, 1]");
        }
        if self.iterations == 0 || self.sorb_nodes < 2 {
            return bad("iterations must be positive and sorb_nodes at least 2");
        }
        if !(self.eta > 0.0) || !(self.grid_res > 0.0) {
            return bad("eta and grid_res must be positive");
        }
        match self.start_goal {
            StartGoalMode::Difficulty => {
                if self.difficulty.is_empty() {
                    return bad("difficulty mode needs a nonempty difficulty list");
                }
                if self.difficulty.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
                    return bad("difficulty values must lie in (0, 1]");
                }
            }
            StartGoalMode::Regions { .. } => {
                if self.horizon.is_none() {
                    return bad("regions mode needs an explicit horizon");
                }
            }
        }
        if self.horizon == Some(0) {
            return bad("horizon must be positive");
        }
        Ok(())
    }

    /// Difficulty levels swept; a single `None` in regions mode.
    pub fn difficulty_levels(&self) -> Vec<Option<f64>> {
        match self.start_goal {
            StartGoalMode::Difficulty => self.difficulty.iter().copied().map(Some).collect(),
            StartGoalMode::Regions { .. } => vec![None],
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::MazeMap;
use crate::geometry::{Point, Rect};
use crate::grid::GridModel;

/// Start/goal separation at difficulty 1, in map units.
pub const DIFFICULTY_SCALE: f64 = 69.0;

/// Relative band around the target separation accepted for a goal.
const SEPARATION_BAND: f64 = 0.02;

const START_RESAMPLES: usize = 500;
const POINT_REJECTIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("difficulty must lie in (0, 1], got {0}")]
    BadDifficulty(f64),
    #[error("no start with a goal at separation {0:.2} found after {1} attempts")]
    Exhausted(f64, usize),
    #[error("region has no free point")]
    EmptyRegion,
}

/// Episode horizon for a difficulty level: 40, 60, 80, 100 steps at
/// 0.3, 0.5, 0.7, 0.9 and linear in between.
pub fn horizon_for_difficulty(difficulty: f64) -> usize {
    (100.0 * difficulty + 10.0).round().max(1.0) as usize
}

/// Uniform sample over the free part of `region`, restricted to points the
/// grid can place in a free cell.
pub fn sample_in_region<R: Rng + ?Sized>(
    map: &MazeMap,
    grid: &GridModel,
    region: Rect,
    rng: &mut R,
) -> Result<Point, SampleError> {
    let region = region.intersection(&map.bounds()).ok_or(SampleError::EmptyRegion)?;
    for _ in 0..POINT_REJECTIONS {
        let p = Point::new(rng.gen_range(region.x0..region.x1), rng.gen_range(region.y0..region.y1));
        if map.is_free(p) && grid.cell_at(p).is_some() {
            return Ok(p);
        }
    }
    Err(SampleError::EmptyRegion)
}

/// Uniform sample over the free space.
pub fn uniform_free_point<R: Rng + ?Sized>(map: &MazeMap, rng: &mut R) -> Point {
    let b = map.bounds();
    loop {
        let p = Point::new(rng.gen_range(b.x0..b.x1), rng.gen_range(b.y0..b.y1));
        if map.is_free(p) {
            return p;
        }
    }
}

/// Draws a start uniformly in free space and a goal whose shortest-path
/// distance from the start is within 2% of `69 * difficulty`. The goal is
/// the centre of a qualifying grid cell.
pub fn sample_start_goal(
    map: &MazeMap,
    grid: &GridModel,
    difficulty: f64,
    seed: u64,
) -> Result<(Point, Point), SampleError> {
    if !(difficulty > 0.0 && difficulty <= 1.0) {
        return Err(SampleError::BadDifficulty(difficulty));
    }
    let target = DIFFICULTY_SCALE * difficulty;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..START_RESAMPLES {
        let start = sample_in_region(map, grid, map.bounds(), &mut rng)?;
        let source = grid.cell_at(start).expect("sampled start has a cell");
        let dist = grid.shortest_from(source);
        let candidates: Vec<usize> = dist
            .iter()
            .enumerate()
            .filter(|(_, d)| (**d - target).abs() <= SEPARATION_BAND * target)
            .map(|(c, _)| c)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let goal = grid.center(candidates[rng.gen_range(0..candidates.len())]);
        return Ok((start, goal));
    }
    Err(SampleError::Exhausted(target, START_RESAMPLES))
}

//! Continuous 2D point-maze simulator.

mod episode;
mod map;
mod sampling;

pub(crate) use map::as_json as map_as_json;

pub use episode::{EpisodeState, StepOutcome, CONTACT_EPS};
pub use map::{
    load_map, step_count, CostModel, Hazard, MapBuilder, MapError, MazeMap, FOUR_ROOMS_JSON, FOUR_ROOMS_STATIC_JSON,
    FOUR_ROOMS_STOCHASTIC_JSON,
};
pub use sampling::{
    horizon_for_difficulty, sample_in_region, sample_start_goal, uniform_free_point, SampleError, DIFFICULTY_SCALE,
};

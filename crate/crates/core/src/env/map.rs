use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::CategoricalDist;
use crate::geometry::{union_area, Disk, Point, Rect};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("failed to parse map document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bounds must be a finite rectangle with positive area")]
    BadBounds,
    #[error("wall {0} is degenerate or lies outside the bounds")]
    WallOutOfBounds(usize),
    #[error("hazard {0} is degenerate or lies outside the bounds")]
    HazardOutOfBounds(usize),
    #[error("hazard {0} has an invalid cost model: {1}")]
    BadCostModel(usize, &'static str),
    #[error("walls cover the whole workspace; free space is empty")]
    NoFreeSpace,
    #[error("map parameter {0} must be positive and finite")]
    BadParameter(&'static str),
}

/// Per-step cost charged while the agent is inside a hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CostModel {
    Static {
        value: f64,
    },
    /// Each step draws one of `atoms` with equal probability.
    Uniform {
        atoms: Vec<u32>,
    },
}

impl CostModel {
    fn validate(&self) -> Result<(), &'static str> {
        match self {
            CostModel::Static { value } if !(value.is_finite() && *value >= 0.0) => {
                Err("static cost must be finite and nonnegative")
            }
            CostModel::Uniform { atoms } if atoms.is_empty() => Err("uniform atom list is empty"),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CostModel::Static { value } => *value,
            CostModel::Uniform { atoms } => atoms[rng.gen_range(0..atoms.len())] as f64,
        }
    }

    pub fn max_cost(&self) -> f64 {
        match self {
            CostModel::Static { value } => *value,
            CostModel::Uniform { atoms } => atoms.iter().copied().max().unwrap_or(0) as f64,
        }
    }

    /// One-step cost distribution on the unit cost grid starting at 0.
    /// Non-integral static values are split between the neighbouring atoms
    /// so the mean is kept.
    pub fn step_dist(&self) -> CategoricalDist {
        match self {
            CostModel::Static { value } => {
                let lo = value.floor();
                let frac = value - lo;
                let lo = lo as usize;
                let mut w = vec![0.0; lo + 2];
                w[lo] = 1.0 - frac;
                w[lo + 1] = frac;
                CategoricalDist::from_weights(0.0, 1.0, w)
                    .expect("static cost weights are valid")
                    .trimmed()
            }
            CostModel::Uniform { atoms } => {
                let top = *atoms.iter().max().expect("validated nonempty") as usize;
                let mut w = vec![0.0; top + 1];
                for &a in atoms {
                    w[a as usize] += 1.0;
                }
                CategoricalDist::from_weights(0.0, 1.0, w).expect("uniform cost weights are valid")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hazard {
    pub center: Point,
    pub radius: f64,
    pub cost: CostModel,
}

impl Hazard {
    pub fn disk(&self) -> Disk {
        Disk {
            center: self.center,
            radius: self.radius,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.disk().contains(p)
    }
}

fn default_unit() -> f64 {
    1.0
}

/// On-disk map document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MapDocument {
    name: String,
    bounds: Rect,
    #[serde(default)]
    walls: Vec<Rect>,
    #[serde(default)]
    hazards: Vec<Hazard>,
    #[serde(default = "default_unit")]
    goal_tolerance: f64,
    #[serde(default = "default_unit")]
    a_max: f64,
    #[serde(default)]
    step_len: Option<f64>,
}

/// Continuous 2D workspace with impenetrable walls and penetrable hazards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapDocument", into = "MapDocument")]
pub struct MazeMap {
    name: String,
    bounds: Rect,
    walls: Vec<Rect>,
    hazards: Vec<Hazard>,
    goal_tolerance: f64,
    a_max: f64,
    step_len: f64,
    free_area: f64,
}

impl TryFrom<MapDocument> for MazeMap {
    type Error = MapError;

    fn try_from(doc: MapDocument) -> Result<Self, MapError> {
        let bounds = doc.bounds;
        if !bounds.is_finite() || bounds.area() <= 0.0 {
            return Err(MapError::BadBounds);
        }
        for (i, w) in doc.walls.iter().enumerate() {
            if !w.is_finite() || w.area() <= 0.0 || !bounds.contains_rect(w) {
                return Err(MapError::WallOutOfBounds(i));
            }
        }
        for (i, h) in doc.hazards.iter().enumerate() {
            if !(h.center.is_finite() && h.radius.is_finite() && h.radius > 0.0) || !bounds.contains(h.center) {
                return Err(MapError::HazardOutOfBounds(i));
            }
            h.cost.validate().map_err(|e| MapError::BadCostModel(i, e))?;
        }
        for (name, v) in [("goal_tolerance", doc.goal_tolerance), ("a_max", doc.a_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MapError::BadParameter(name));
            }
        }
        let step_len = doc.step_len.unwrap_or(doc.a_max);
        if !(step_len.is_finite() && step_len > 0.0) {
            return Err(MapError::BadParameter("step_len"));
        }
        let free_area = bounds.area() - union_area(&doc.walls);
        if free_area <= 1e-12 * bounds.area() {
            return Err(MapError::NoFreeSpace);
        }
        Ok(MazeMap {
            name: doc.name,
            bounds,
            walls: doc.walls,
            hazards: doc.hazards,
            goal_tolerance: doc.goal_tolerance,
            a_max: doc.a_max,
            step_len,
            free_area,
        })
    }
}

impl From<MazeMap> for MapDocument {
    fn from(m: MazeMap) -> Self {
        MapDocument {
            name: m.name,
            bounds: m.bounds,
            walls: m.walls,
            hazards: m.hazards,
            goal_tolerance: m.goal_tolerance,
            a_max: m.a_max,
            step_len: Some(m.step_len),
        }
    }
}

/// Parses and validates a JSON map document.
pub fn load_map(text: &str) -> Result<MazeMap, MapError> {
    let doc: MapDocument = serde_json::from_str(text)?;
    MazeMap::try_from(doc)
}

/// The four-room benchmark layout without hazards.
pub const FOUR_ROOMS_JSON: &str = include_str!("../../../../maps/four_rooms.json");
/// The four-room layout with static unit-cost hazards in the two left rooms.
pub const FOUR_ROOMS_STATIC_JSON: &str = include_str!("../../../../maps/four_rooms_static.json");
/// The four-room layout with hazards charging a uniform draw from {0, 1, 2}.
pub const FOUR_ROOMS_STOCHASTIC_JSON: &str = include_str!("../../../../maps/four_rooms_stochastic.json");

impl MazeMap {
    pub fn four_rooms() -> Self {
        load_map(FOUR_ROOMS_JSON).expect("bundled map is valid")
    }

    pub fn four_rooms_static() -> Self {
        load_map(FOUR_ROOMS_STATIC_JSON).expect("bundled map is valid")
    }

    pub fn four_rooms_stochastic() -> Self {
        load_map(FOUR_ROOMS_STOCHASTIC_JSON).expect("bundled map is valid")
    }

    /// Open rectangular arena, handy for tests.
    pub fn open_arena(width: f64, height: f64) -> Self {
        Self::builder("open", Rect::new(0.0, 0.0, width, height))
            .build()
            .expect("open arena is valid")
    }

    pub fn builder(name: &str, bounds: Rect) -> MapBuilder {
        MapBuilder {
            doc: MapDocument {
                name: name.to_string(),
                bounds,
                walls: Vec::new(),
                hazards: Vec::new(),
                goal_tolerance: 1.0,
                a_max: 1.0,
                step_len: None,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn walls(&self) -> &[Rect] {
        &self.walls
    }

    pub fn hazards(&self) -> &[Hazard] {
        &self.hazards
    }

    pub fn goal_tolerance(&self) -> f64 {
        self.goal_tolerance
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn step_len(&self) -> f64 {
        self.step_len
    }

    /// Lebesgue measure of the free space.
    pub fn free_area(&self) -> f64 {
        self.free_area
    }

    pub fn is_free(&self, p: Point) -> bool {
        self.bounds.contains(p) && !self.walls.iter().any(|w| w.contains(p))
    }

    /// True iff the closed segment touches any wall.
    pub fn segment_collides(&self, a: Point, b: Point) -> bool {
        self.walls.iter().any(|w| w.intersects_segment(a, b))
    }

    /// Fraction of `a -> b` travelled before first touching a wall or leaving
    /// the bounds; `None` when the whole segment is clear.
    pub fn first_contact(&self, a: Point, b: Point) -> Option<f64> {
        let mut hit: Option<f64> = None;
        for w in &self.walls {
            if let Some((t_in, _)) = w.clip_segment(a, b) {
                hit = Some(hit.map_or(t_in, |h| h.min(t_in)));
            }
        }
        if !self.bounds.contains(b) {
            let (_, t_out) = self.bounds.clip_segment(a, b).unwrap_or((0.0, 0.0));
            hit = Some(hit.map_or(t_out, |h| h.min(t_out)));
        }
        hit
    }

    /// Sum of per-step cost draws for a post-step position.
    pub fn sample_cost<R: Rng + ?Sized>(&self, p: Point, rng: &mut R) -> f64 {
        self.hazards
            .iter()
            .filter(|h| h.contains(p))
            .map(|h| h.cost.sample(rng))
            .sum()
    }

    pub fn in_any_hazard(&self, p: Point) -> bool {
        self.hazards.iter().any(|h| h.contains(p))
    }

    /// For each hazard, how many of the discretized steps of length
    /// `step_len` along `a -> b` end inside it. The last step may be short
    /// and always ends at `b`.
    pub fn hazard_step_count(&self, a: Point, b: Point, step_len: f64) -> Vec<u32> {
        assert!(step_len > 0.0);
        let len = a.dist(b);
        let n_steps = step_count(len, step_len);
        self.hazards
            .iter()
            .map(|h| {
                if n_steps == 0 {
                    return 0;
                }
                let Some((t0, t1)) = h.disk().line_interval(a, b) else {
                    return 0;
                };
                // arc-length interval inside the disk
                let (s0, s1) = (t0 * len, t1 * len);
                let mut count = 0u32;
                if n_steps > 1 {
                    let lo = (s0 / step_len).ceil().max(1.0);
                    let hi = (s1 / step_len).floor().min((n_steps - 1) as f64);
                    if hi >= lo {
                        count += (hi - lo) as u32 + 1;
                    }
                }
                if len >= s0 && len <= s1 {
                    count += 1;
                }
                count
            })
            .collect()
    }

    /// Cost distribution of the given per-hazard step counts, on the unit
    /// cost grid, with independent draws per step.
    pub fn cost_dist_for_counts(&self, counts: &[u32]) -> CategoricalDist {
        use crate::dist::ConvolveMode;
        let mut total = CategoricalDist::point_mass(0.0, 1.0, 1, 0);
        for (h, &k) in self.hazards.iter().zip(counts) {
            if k == 0 {
                continue;
            }
            let step = h.cost.step_dist();
            for _ in 0..k {
                total = total
                    .convolve(&step, ConvolveMode::Exact)
                    .expect("cost grids share spacing");
            }
        }
        total
    }

    /// Largest single-step cost over all hazards if they overlap.
    pub fn max_step_cost(&self) -> f64 {
        self.hazards.iter().map(|h| h.cost.max_cost()).sum()
    }
}

/// Serde adapter that stores a map as its JSON document, for binary
/// formats that cannot decode the tagged cost models directly.
pub(crate) mod as_json {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::MazeMap;

    pub fn serialize<S: Serializer>(map: &MazeMap, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&serde_json::to_string(map).map_err(serde::ser::Error::custom)?)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MazeMap, D::Error> {
        let text = String::deserialize(d)?;
        super::load_map(&text).map_err(serde::de::Error::custom)
    }
}

/// Number of discretized steps of length `step_len` needed to cover `len`.
pub fn step_count(len: f64, step_len: f64) -> usize {
    if len <= 1e-12 {
        0
    } else {
        ((len / step_len) - 1e-9).ceil().max(1.0) as usize
    }
}

pub struct MapBuilder {
    doc: MapDocument,
}

impl MapBuilder {
    pub fn wall(mut self, r: Rect) -> Self {
        self.doc.walls.push(r);
        self
    }

    pub fn hazard(mut self, center: Point, radius: f64, cost: CostModel) -> Self {
        self.doc.hazards.push(Hazard { center, radius, cost });
        self
    }

    pub fn goal_tolerance(mut self, v: f64) -> Self {
        self.doc.goal_tolerance = v;
        self
    }

    pub fn a_max(mut self, v: f64) -> Self {
        self.doc.a_max = v;
        self
    }

    pub fn step_len(mut self, v: f64) -> Self {
        self.doc.step_len = Some(v);
        self
    }

    pub fn build(self) -> Result<MazeMap, MapError> {
        MazeMap::try_from(self.doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_maps_load() {
        let m = MazeMap::four_rooms_static();
        assert_eq!(m.hazards().len(), 2);
        assert_eq!(m.bounds(), Rect::new(0.0, 0.0, 80.0, 80.0));
        assert!(MazeMap::four_rooms().hazards().is_empty());
        let s = MazeMap::four_rooms_stochastic();
        assert!(matches!(s.hazards()[0].cost, CostModel::Uniform { .. }));
        assert!(m.free_area() < 6400.0 && m.free_area() > 5500.0);
    }

    #[test]
    fn rejects_hazard_outside_bounds() {
        let text = r#"{"name":"x","bounds":[0,0,10,10],"walls":[],
            "hazards":[{"center":[12,5],"radius":1,"cost":{"kind":"static","value":1}}]}"#;
        assert!(matches!(load_map(text), Err(MapError::HazardOutOfBounds(0))));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(load_map("{"), Err(MapError::Parse(_))));
        let wall_out = r#"{"name":"x","bounds":[0,0,10,10],"walls":[[5,5,11,6]],"hazards":[]}"#;
        assert!(matches!(load_map(wall_out), Err(MapError::WallOutOfBounds(0))));
        let full = r#"{"name":"x","bounds":[0,0,10,10],"walls":[[0,0,10,10]],"hazards":[]}"#;
        assert!(matches!(load_map(full), Err(MapError::NoFreeSpace)));
        let empty_atoms = r#"{"name":"x","bounds":[0,0,10,10],"walls":[],
            "hazards":[{"center":[5,5],"radius":1,"cost":{"kind":"uniform","atoms":[]}}]}"#;
        assert!(matches!(load_map(empty_atoms), Err(MapError::BadCostModel(0, _))));
    }

    #[test]
    fn empty_walls_is_an_open_arena() {
        let m = load_map(r#"{"name":"arena","bounds":[0,0,20,10],"walls":[],"hazards":[]}"#).unwrap();
        assert_eq!(m.free_area(), 200.0);
        assert_eq!(m.a_max(), 1.0);
        assert_eq!(m.step_len(), 1.0);
    }

    #[test]
    fn json_round_trip() {
        let m = MazeMap::four_rooms_stochastic();
        let back = load_map(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn segment_collision_cases() {
        let m = MazeMap::builder("w", Rect::new(0.0, 0.0, 10.0, 10.0))
            .wall(Rect::new(4.0, 0.0, 6.0, 8.0))
            .build()
            .unwrap();
        let p = Point::new(1.0, 1.0);
        assert!(!m.segment_collides(p, p));
        assert!(m.segment_collides(Point::new(1.0, 4.0), Point::new(9.0, 4.0)));
        assert!(!m.segment_collides(Point::new(1.0, 9.0), Point::new(9.0, 9.0)));
        // grazes the corner (4, 8) exactly
        assert!(m.segment_collides(Point::new(2.0, 10.0), Point::new(6.0, 6.0)));
    }

    #[test]
    fn hazard_counts() {
        let m = MazeMap::builder("h", Rect::new(0.0, 0.0, 40.0, 40.0))
            .hazard(Point::new(20.0, 20.0), 10.0, CostModel::Static { value: 1.0 })
            .build()
            .unwrap();
        assert_eq!(
            m.hazard_step_count(Point::new(1.0, 1.0), Point::new(5.0, 1.0), 1.0),
            vec![0]
        );
        assert_eq!(
            m.hazard_step_count(Point::new(15.0, 20.0), Point::new(20.0, 20.0), 1.0),
            vec![5]
        );
        assert_eq!(
            m.hazard_step_count(Point::new(15.0, 20.0), Point::new(15.0, 20.0), 1.0),
            vec![0]
        );
    }

    #[test]
    fn step_dists() {
        let s = CostModel::Static { value: 1.0 }.step_dist();
        assert_eq!(s.probs(), &[0.0, 1.0]);
        let u = CostModel::Uniform { atoms: vec![0, 1, 2] }.step_dist();
        assert_eq!(u.len(), 3);
        assert!((u.expectation() - 1.0).abs() < 1e-12);
        let frac = CostModel::Static { value: 0.5 }.step_dist();
        assert!((frac.expectation() - 0.5).abs() < 1e-12);
    }
}

//! Occupancy grid over a [`MazeMap`] with 8-connected moves.
//!
//! A cell is blocked iff it overlaps a wall with positive area. Diagonal
//! moves are only allowed when both orthogonal neighbours are free, so the
//! straight segment between adjacent free cell centres never touches a wall.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::MazeMap;
use crate::geometry::{Point, Rect};

pub type Cell = usize;

/// The eight unit moves, axis moves first.
pub const MOVES: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

pub const NO_MOVE: u8 = u8::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("grid of {0} x {1} cells is too large")]
    TooLarge(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    origin: Point,
    res: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
    component: Vec<u32>,
}

/// Min-heap entry for Dijkstra.
#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    cell: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NO_COMPONENT: u32 = u32::MAX;

impl GridModel {
    pub fn new(map: &MazeMap, res: f64) -> Result<Self, GridError> {
        if !(res.is_finite() && res > 0.0) {
            return Err(GridError::BadResolution(res));
        }
        let b = map.bounds();
        let nx = ((b.width() / res) - 1e-9).ceil().max(1.0) as usize;
        let ny = ((b.height() / res) - 1e-9).ceil().max(1.0) as usize;
        if nx.saturating_mul(ny) > 50_000_000 {
            return Err(GridError::TooLarge(nx, ny));
        }
        let origin = Point::new(b.x0, b.y0);
        let mut free = vec![true; nx * ny];
        for w in map.walls() {
            let ix0 = (((w.x0 - b.x0) / res).floor().max(0.0) as usize).min(nx - 1);
            let ix1 = (((w.x1 - b.x0) / res).ceil().max(0.0) as usize).min(nx);
            let iy0 = (((w.y0 - b.y0) / res).floor().max(0.0) as usize).min(ny - 1);
            let iy1 = (((w.y1 - b.y0) / res).ceil().max(0.0) as usize).min(ny);
            for iy in iy0..iy1 {
                for ix in ix0..ix1 {
                    let cell = iy * nx + ix;
                    if free[cell] && Self::rect_of(origin, res, ix, iy).overlaps_interior(w) {
                        free[cell] = false;
                    }
                }
            }
        }
        let mut grid = Self {
            origin,
            res,
            nx,
            ny,
            free,
            component: Vec::new(),
        };
        grid.label_components();
        Ok(grid)
    }

    fn rect_of(origin: Point, res: f64, ix: usize, iy: usize) -> Rect {
        let x0 = origin.x + ix as f64 * res;
        let y0 = origin.y + iy as f64 * res;
        Rect::new(x0, y0, x0 + res, y0 + res)
    }

    fn label_components(&mut self) {
        let mut component = vec![NO_COMPONENT; self.free.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..self.free.len() {
            if !self.free[start] || component[start] != NO_COMPONENT {
                continue;
            }
            component[start] = next;
            stack.push(start);
            while let Some(c) = stack.pop() {
                for (n, _) in self.neighbors(c) {
                    if component[n] == NO_COMPONENT {
                        component[n] = next;
                        stack.push(n);
                    }
                }
            }
            next += 1;
        }
        self.component = component;
    }

    pub fn res(&self) -> f64 {
        self.res
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.free[c]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.free.len()).filter(|&c| self.free[c])
    }

    pub fn coords(&self, c: Cell) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn index(&self, ix: usize, iy: usize) -> Cell {
        iy * self.nx + ix
    }

    pub fn center(&self, c: Cell) -> Point {
        let (ix, iy) = self.coords(c);
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.res,
            self.origin.y + (iy as f64 + 0.5) * self.res,
        )
    }

    pub fn cell_rect(&self, c: Cell) -> Rect {
        let (ix, iy) = self.coords(c);
        Self::rect_of(self.origin, self.res, ix, iy)
    }

    pub fn same_component(&self, a: Cell, b: Cell) -> bool {
        self.component[a] != NO_COMPONENT && self.component[a] == self.component[b]
    }

    /// Cell containing `p`; a point falling in a blocked cell snaps to the
    /// closest free 8-neighbour.
    pub fn cell_at(&self, p: Point) -> Option<Cell> {
        if !p.is_finite() {
            return None;
        }
        let fx = (p.x - self.origin.x) / self.res;
        let fy = (p.y - self.origin.y) / self.res;
        // same as flooring first: truncation below equals floor once clamped to >= 0
        if fx < -1.0 || fy < -1.0 || fx >= (self.nx + 1) as f64 || fy >= (self.ny + 1) as f64 {
            return None;
        }
        let ix = (fx.max(0.0) as usize).min(self.nx - 1);
        let iy = (fy.max(0.0) as usize).min(self.ny - 1);
        let c = self.index(ix, iy);
        if self.free[c] {
            return Some(c);
        }
        let mut best: Option<(f64, Cell)> = None;
        for (dx, dy) in MOVES {
            let (jx, jy) = (ix as i64 + dx as i64, iy as i64 + dy as i64);
            if jx < 0 || jy < 0 || jx >= self.nx as i64 || jy >= self.ny as i64 {
                continue;
            }
            let n = self.index(jx as usize, jy as usize);
            if !self.free[n] {
                continue;
            }
            let d2 = self.cell_rect(n).dist2_to(p);
            if best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, n));
            }
        }
        best.map(|(_, n)| n)
    }

    /// Neighbour reached by move `m` from `c`, honouring the no-corner-cutting rule.
    pub fn step(&self, c: Cell, m: usize) -> Option<Cell> {
        let (ix, iy) = self.coords(c);
        let (dx, dy) = MOVES[m];
        let jx = ix as i64 + dx as i64;
        let jy = iy as i64 + dy as i64;
        if jx < 0 || jy < 0 || jx >= self.nx as i64 || jy >= self.ny as i64 {
            return None;
        }
        let n = self.index(jx as usize, jy as usize);
        if !self.free[n] {
            return None;
        }
        if dx != 0 && dy != 0 {
            let side_a = self.index(jx as usize, iy);
            let side_b = self.index(ix, jy as usize);
            if !self.free[side_a] || !self.free[side_b] {
                return None;
            }
        }
        Some(n)
    }

    /// Length of move `m` in map units.
    pub fn move_len(&self, m: usize) -> f64 {
        if m < 4 {
            self.res
        } else {
            self.res * std::f64::consts::SQRT_2
        }
    }

    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = (Cell, usize)> + '_ {
        (0..MOVES.len()).filter_map(move |m| self.step(c, m).map(|n| (n, m)))
    }

    /// Single-source shortest-path lengths to every cell (infinite when unreachable).
    pub fn shortest_from(&self, source: Cell) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        if !self.free[source] {
            return dist;
        }
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Frontier {
            dist: 0.0,
            cell: source,
        });
        while let Some(Frontier { dist: d, cell }) = heap.pop() {
            if d > dist[cell] {
                continue;
            }
            for (n, m) in self.neighbors(cell) {
                let nd = d + self.move_len(m);
                if nd < dist[n] {
                    dist[n] = nd;
                    heap.push(Frontier { dist: nd, cell: n });
                }
            }
        }
        dist
    }

    /// Shortest-path lengths from `source` to the `(2 radius + 1)^2` window
    /// centred on it, exploring only inside the window and only up to
    /// `max_dist`. Entries beyond either limit are infinite.
    pub fn window_field(&self, source: Cell, radius: usize, max_dist: f64) -> Vec<f32> {
        let side = 2 * radius + 1;
        let mut out = vec![f32::INFINITY; side * side];
        if !self.free[source] {
            return out;
        }
        let (sx, sy) = self.coords(source);
        let local = |c: Cell| -> Option<usize> {
            let (ix, iy) = self.coords(c);
            let ox = ix as i64 - sx as i64 + radius as i64;
            let oy = iy as i64 - sy as i64 + radius as i64;
            (ox >= 0 && oy >= 0 && (ox as usize) < side && (oy as usize) < side)
                .then(|| oy as usize * side + ox as usize)
        };
        let mut dist = vec![f64::INFINITY; side * side];
        let src = local(source).expect("source is the window centre");
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Frontier {
            dist: 0.0,
            cell: source,
        });
        while let Some(Frontier { dist: d, cell }) = heap.pop() {
            let li = local(cell).expect("only window cells are pushed");
            if d > dist[li] {
                continue;
            }
            for (n, m) in self.neighbors(cell) {
                let Some(ln) = local(n) else { continue };
                let nd = d + self.move_len(m);
                if nd <= max_dist && nd < dist[ln] {
                    dist[ln] = nd;
                    heap.push(Frontier { dist: nd, cell: n });
                }
            }
        }
        for (o, d) in out.iter_mut().zip(dist) {
            *o = d as f32;
        }
        out
    }

    /// Offset of `target` inside the window of the given radius centred at `source`.
    pub fn window_offset(&self, source: Cell, target: Cell, radius: usize) -> Option<usize> {
        let (sx, sy) = self.coords(source);
        let (tx, ty) = self.coords(target);
        let ox = tx as i64 - sx as i64 + radius as i64;
        let oy = ty as i64 - sy as i64 + radius as i64;
        let side = (2 * radius + 1) as i64;
        (ox >= 0 && oy >= 0 && ox < side && oy < side).then(|| (oy * side + ox) as usize)
    }

    /// Window radius (in cells) that covers every pair within path length `eta`.
    pub fn window_radius(&self, eta: f64) -> usize {
        (eta / self.res).ceil() as usize + 1
    }
}

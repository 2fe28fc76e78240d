//! Constrained planning over goal-conditioned distributional value estimates.
//!
//! The lower level ([`lower`]) answers local queries: expected reward `V(s, s')`
//! (the negated shortest-path length), the categorical cost-to-go
//! distribution `V_c(s, s')`, and a greedy local policy. The upper level
//! ([`planner`]) grows a constrained informed RRT* tree whose edges are only
//! accepted when the CVaR of the accumulated path cost stays within a budget.
//! [`executor`] runs plans in the simulator ([`env`]) and [`harness`] drives
//! whole experiments.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod env;
pub mod executor;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod lower;
pub mod planner;

pub use dist::{CategoricalDist, ConvolveMode, DistError};
pub use geometry::{Point, Rect};

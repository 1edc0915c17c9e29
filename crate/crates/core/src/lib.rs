//! Support measures of convex bodies.
//!
//! The crate estimates the support measures `Λ_0, …, Λ_{n-1}` of a convex
//! body from Monte-Carlo samples of its local parallel sets, computes the
//! bounded-Lipschitz distance between discrete measures exactly by linear
//! programming, and runs the continuity and optimality experiments built on
//! both.
//!
//! Modules, bottom-up:
//!
//! * [`geometry`]: bodies, support functions, metric projection, Hausdorff
//!   distance and shell sampling.
//! * [`measures`]: discrete measures on `R^n × S^{n-1}`, their extraction
//!   from parallel volumes, exact oracles for balls and polytopes.
//! * [`metric`]: the bounded-Lipschitz LP and its solvers.
//! * [`optimality`]: the cap-cut construction showing exponent 1/2 is sharp.
//! * [`experiments`]: perturbation ladders, exponent fits, reports.

pub mod constants;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod measures;
pub mod metric;
pub mod optimality;
pub mod quadrature;
pub mod vector;

pub use constants::DimensionConstants;
pub use error::{Error, Result};
pub use geometry::{ConvexBody, HalfSpace, ProjectionResult};

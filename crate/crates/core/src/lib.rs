//! Exact solver for the vehicle routing problem with stochastic demands.
//!
//! The recourse of an a priori route is evaluated either under the optimal
//! restocking policy (a Bellman recursion over residual capacity) or under the
//! detour-to-depot policy (expected failures from partial-sum distributions).
//! The [`solver`] module implements a disaggregated integer L-shaped
//! branch-and-cut in which each customer carries its own recourse variable,
//! strengthened by path, set and edge-set optimality cuts. The [`oracle`]
//! module provides brute-force counterparts used to verify everything else.

pub mod bounds;
pub mod builtin;
pub mod cuts;
pub mod demand;
pub mod error;
pub mod graph;
pub mod instance;
pub mod lp;
pub mod oracle;
pub mod recourse;
pub mod reproduce;
pub mod solver;

pub use demand::{DemandDistribution, DemandFamily};
pub use error::{Error, Result};
pub use graph::{Edge, EdgeSet, EdgeValues};
pub use instance::{Instance, InstanceFormat, Path, VariantConfig};
pub use recourse::{Policy, RecourseCache, RecourseValue};
pub use solver::{SolveOptions, SolveStatus, Solution};

/// Tolerance used when comparing expected demands against `fQ`.
pub const DEMAND_EPS: f64 = 1e-9;

/// Default tail mass dropped when truncating unbounded distributions.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

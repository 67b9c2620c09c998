//! Finite POMDPs reduced to belief-state MDPs.
//!
//! The crate is organised around the reduction pipeline:
//!
//! - [`measures`]: finitely supported measures and the three distances used to
//!   compare them (total variation, setwise gaps, Wasserstein-1).
//! - [`model`]: the finite POMDP tuple, beliefs and validity checks.
//! - [`filter`]: the joint kernel, observation marginal, Bayes posterior map and
//!   the belief-transition kernel built on top of them.
//! - [`solver`]: exact alpha-vector backups, grid value iteration on the belief
//!   simplex, greedy policies and Monte Carlo policy evaluation.
//! - [`probe`]: numeric continuity diagnostics for the kernels along sequences.
//! - [`models`]: built-in model constructors (counterexamples, inventory
//!   control with containers, a discretised scalar Kalman model).
//! - [`io`] and [`cli`]: JSON model documents and the command-line front end.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod filter;
pub mod io;
pub mod measures;
pub mod model;
pub mod models;
pub mod probe;
pub mod solver;

pub use error::{Error, Result};
pub use filter::{BeliefDistribution, JointTable};
pub use measures::{FiniteMeasure, MetricSupport, TestSet};
pub use model::{Belief, Cost, CostMode, DiscretePomdp, LabeledPoint, ModelParts};

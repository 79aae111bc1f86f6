//! Multi-objective optimization of interventions in structural causal
//! models.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: causal graphs with confounders, latent projection and the
//!   enumeration of possibly Pareto-optimal minimal intervention sets.
//! - [`scm`]: structural causal models, Monte-Carlo interventional means and
//!   the built-in benchmark problems.
//! - [`surrogate`]: Gaussian-process models of the interventional means.
//! - [`pareto`]: dominance, hypervolume, front discovery and batch selection.
//! - [`solver`]: the set-arbitrating Bayesian optimization loop.
//! - [`experiment`]: multi-seed runs and summary statistics.

pub mod experiment;
pub mod graph;
pub mod pareto;
pub mod rng;
pub mod scm;
pub mod solver;
pub mod surrogate;

//! Safety-aware pedestrian routing.
//!
//! Street intersections become nodes of a directed graph whose edges carry a
//! compass action. Node2vec-style embeddings describe the agent's state, a
//! small feed-forward policy picks the next compass direction, and training
//! first imitates length-shortest paths before being refined with a reward
//! that favours distance from recent crimes. Dijkstra and a KDE-risk Pareto
//! router serve as baselines for evaluation.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod crime;
mod csvio;
pub mod embed;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geo;
pub mod graph;
pub mod metrics;
pub mod path;
pub mod policy;
pub mod routing;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;

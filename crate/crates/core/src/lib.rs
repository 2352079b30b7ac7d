//! Workflow reconstruction: recover a chain of agent primitives that
//! reproduces observed input/output pairs, using Monte Carlo tree search with
//! quantile-based width pruning.

pub mod bench;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod execution;
pub mod search;
pub mod similarity;
pub mod space;

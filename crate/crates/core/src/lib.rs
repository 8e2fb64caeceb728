//! Benchmark harness for graph community detection: tuned multi-seed
//! evaluation of algorithms across datasets and metrics, with statistics on
//! how consistent the resulting rankings are.

pub mod graph;
pub mod metrics;
pub mod concordance;
pub mod hpo;
pub mod runner;
pub mod orchestrator;
pub mod store;
pub mod fetch;
pub mod cli;

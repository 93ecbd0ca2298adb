//! Graph-based k-nearest-neighbor search with trace instrumentation.
//!
//! The crate builds exact KNN graphs over dense float vectors (with several
//! edge-selection strategies), runs best-first beam search with backtracking
//! over them, and computes the diagnostics that explain search quality:
//! clustering coefficients, strongly connected components of query
//! neighborhoods, and two-phase decompositions of search traces.
//!
//! Modules:
//! - [`dataset`]: vector storage, distances, the brute-force oracle, file IO,
//!   synthetic data generation.
//! - [`graph`]: KNN graph construction (directed / undirected / lune-pruned)
//!   and binary serialization.
//! - [`search`]: the beam search itself, producing replayable [`search::SearchTrace`]s.
//! - [`analysis`]: clustering coefficients, SCC decomposition, phase splits,
//!   recall, and the traversal-guarantee checker.
//! - [`harness`]: end-to-end experiment runners emitting CSV/JSON reports.

pub mod analysis;
pub mod dataset;
mod error;
pub mod graph;
pub mod harness;
pub mod search;

pub use error::{Error, Result};

/// Dense vertex identifier, `0..n-1` within a dataset/graph.
pub type VertexId = u32;

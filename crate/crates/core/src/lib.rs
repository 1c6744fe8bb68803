//! Deterministic worst-case dynamic connectivity for undirected graphs.
//!
//! The structure maintains a spanning forest of an n-vertex graph under edge
//! insertions and deletions, answering connectivity queries in constant time.
//! Each tree is kept as a circular Euler tour, the tours are cut into chunks
//! and superchunks of bounded mass, and chunk-to-chunk adjacency is held in
//! word-packed bit matrices so replacement-edge search after a tree-edge
//! deletion touches only a bounded number of words and edges.

mod error;
mod params;

pub mod adjacency;
pub mod audit;
pub mod engine;
pub mod graph;
pub mod list_sum;
pub mod oracle;
pub mod packed;
pub mod tour;
pub mod word_matrix;

pub use audit::{audit, Violation};
pub use engine::{Connectivity, OpCounters};
pub use error::Error;
pub use params::{Encoding, Overrides, Params};

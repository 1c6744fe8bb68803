//! Library-wide error type.

use std::fmt;

/// Errors reported by the connectivity engine and its support structures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A vertex id was outside `0..n`.
    VertexOutOfRange { v: u32, n: u32 },
    /// Self loops are not representable.
    SelfLoop { v: u32 },
    /// The edge is already present.
    DuplicateEdge { u: u32, v: u32 },
    /// The edge is not present.
    MissingEdge { u: u32, v: u32 },
    /// Inserting would exceed the declared edge capacity.
    CapacityExceeded { mhat: usize },
    /// The superchunk id universe ran dry; the structure cannot grow further.
    IdsExhausted { j: usize },
    /// Construction-time parameter validation failed.
    InvalidParams(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::VertexOutOfRange { v, n } => {
                write!(f, "vertex {v} out of range (n = {n})")
            }
            Error::SelfLoop { v } => write!(f, "self loop at vertex {v} rejected"),
            Error::DuplicateEdge { u, v } => write!(f, "edge ({u}, {v}) already present"),
            Error::MissingEdge { u, v } => write!(f, "edge ({u}, {v}) not present"),
            Error::CapacityExceeded { mhat } => {
                write!(f, "edge capacity mhat = {mhat} exceeded")
            }
            Error::IdsExhausted { j } => {
                write!(f, "superchunk id universe of size {j} exhausted")
            }
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

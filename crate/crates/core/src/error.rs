use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("assignment is missing node {0}")]
    MissingNode(NodeId),
    #[error("model with {nodes} variables exceeds the exhaustive-search limit of {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("chain references unknown target node {0}")]
    UnknownTargetNode(NodeId),
    #[error("embedding domain does not match the source graph: {0}")]
    DomainMismatch(String),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),
    #[error("clique of size {requested} exceeds capacity {capacity}")]
    Capacity { requested: usize, capacity: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared across the engine.

use thiserror::Error;

/// Errors produced by graph construction, ingestion, sampling, and statistics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("node index {index} out of range for graph of {node_count} nodes")]
    BadIndex { index: usize, node_count: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("graph or node subset is not connected{}", .0.as_ref().map(|s| format!(": {s}")).unwrap_or_default())]
    NotConnected(Option<String>),
    #[error("plan is not contiguous: {0}")]
    NotContiguous(String),
    #[error("join failure: {0}")]
    Join(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("geometry unavailable: {0}")]
    GeometryUnavailable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("name error: {0}")]
    Name(String),
    #[error("sampler collapse at stage {stage}: {reason}")]
    SamplerCollapse { stage: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

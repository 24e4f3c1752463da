use thiserror::Error;

use crate::gene::AxiomReport;
use crate::tree::VertexId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex {0:?}")]
    UnknownVertex(VertexId),
    #[error("empty vertex or label set")]
    EmptySet,
    #[error("unknown leaf label {0}")]
    UnknownLabel(String),
    #[error("duplicate leaf label {0}")]
    DuplicateLabel(String),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("invalid extension at {vertex:?}: {reason}")]
    InvalidExtension { vertex: VertexId, reason: String },
    #[error("vertex {0:?} is not a cherry")]
    NotCherry(VertexId),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid gene tree: {0}")]
    InvalidGeneTree(String),
    #[error("gene tree violates the observability axioms ({} violation(s))", .0.violations.len())]
    Axioms(AxiomReport),
    #[error("species tree leaves do not match the gene tree species: {0}")]
    LeafSetMismatch(String),
    #[error("species tree is not almost binary")]
    NotAlmostBinary,
    #[error("{what} exceeds the limit of {limit}")]
    LimitExceeded { what: &'static str, limit: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

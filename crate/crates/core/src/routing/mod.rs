//! Round-robin path selection and hop-by-hop forwarding.

mod entry;
mod registry;
mod relay;

pub use entry::{EntryNode, DEFAULT_HOPS};
pub use registry::{parse_nodes_file, NodeEntry, NodeRegistry, PathPolicy, RelayPath};
pub use relay::{ForwardAction, RelayNode};

use thiserror::Error;

use crate::addr::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("node registry is empty")]
    EmptyRegistry,
    #[error("path of {k} hops requested but only {nodes} nodes are registered")]
    PathTooLong { k: usize, nodes: usize },
    #[error("hop count must be at least 1")]
    ZeroHops,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("frame addressed to {expected:?}, not this node")]
    NotNextHop { expected: Option<NodeId> },
    #[error("ttl expired before reaching the terminal")]
    TtlExpired,
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("bad nodes file line {line}: {reason}")]
    BadNodesFile { line: usize, reason: String },
}

impl RoutingError {
    /// Short token for structured log lines.
    pub fn reason(&self) -> &'static str {
        match self {
            RoutingError::EmptyRegistry => "empty_registry",
            RoutingError::PathTooLong { .. } => "path_too_long",
            RoutingError::ZeroHops => "zero_hops",
            RoutingError::DuplicateNode(_) => "duplicate_node",
            RoutingError::NotNextHop { .. } => "not_next_hop",
            RoutingError::TtlExpired => "ttl_expired",
            RoutingError::MalformedPayload(_) => "malformed_payload",
            RoutingError::BadNodesFile { .. } => "bad_nodes_file",
        }
    }
}

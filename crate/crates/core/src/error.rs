use std::path::PathBuf;

use thiserror::Error;

use crate::topology::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("client {client} hears no access point")]
    OrphanClient { client: NodeId },

    #[error("control-channel graph of the mesh backhaul is disconnected")]
    DisconnectedBackhaul,

    #[error("nodes {0} and {1} occupy the same position")]
    CoincidentNodes(NodeId, NodeId),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("trace {path}: line {line}: {msg}")]
    Trace { path: PathBuf, line: u64, msg: String },

    #[error("instance too large for exact search: {0}")]
    TooLarge(String),

    #[error("allocation problem has no feasible assignment")]
    Infeasible,

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TooLarge(_) | Error::Infeasible => 2,
            _ => 1,
        }
    }
}

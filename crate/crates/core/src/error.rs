use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::netsim::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no route from node {src} to node {dst}")]
    Unreachable { src: NodeId, dst: NodeId },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("link failure: {0}")]
    Mutation(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("infeasible action in block {block}: {reason}")]
    Constraint { block: usize, reason: String },

    #[error("agent {agent}: {source}")]
    Agent {
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("cannot scale traffic: {0}")]
    Scaling(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse error classes, used by the command-line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Routing,
    Io,
    Other,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Scaling(_) => ErrorCategory::Config,
            Error::Unreachable { .. } | Error::Topology(_) | Error::Mutation(_) => {
                ErrorCategory::Routing
            }
            Error::Io(_) | Error::Csv(_) => ErrorCategory::Io,
            Error::Agent { source, .. } | Error::Step { source, .. } => source.category(),
            Error::Constraint { .. } | Error::Dimension { .. } => ErrorCategory::Other,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

impl ErrorCategory {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Routing => 3,
            ErrorCategory::Io => 4,
            ErrorCategory::Other => 1,
        }
    }
}

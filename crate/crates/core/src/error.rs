use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing table: {0}")]
    MissingTable(&'static str),

    #[error("invalid case data: {0}")]
    InvalidData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),

    #[error("cut archive: {0}")]
    Archive(String),

    #[error("archive topology ({archive_buses} buses, {archive_branches} branches) does not match network ({buses} buses, {branches} branches)")]
    TopologyMismatch {
        archive_buses: usize,
        archive_branches: usize,
        buses: usize,
        branches: usize,
    },

    #[error("solution snapshot requested without an optimal solve")]
    NoSolution,

    #[error("flow conservation violated by {residual:e} at node {node}")]
    Conservation { node: String, residual: f64 },

    #[error("invalid parameter: {0}")]
    Param(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

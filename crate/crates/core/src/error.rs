use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and its file formats.
#[derive(Debug, Error)]
pub enum AncError {
    /// Invalid construction parameters or scenario fields. Each entry is one
    /// violated field.
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    /// A node or the network was driven in a way the protocol forbids.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("path bundle {path}: {reason}")]
    PathBundle { path: PathBuf, reason: String },

    #[error("audio file {path}: {reason}")]
    Audio { path: PathBuf, reason: String },

    #[error("sample-rate mismatch: file is {file} Hz, scenario expects {expected} Hz")]
    SampleRateMismatch { file: u32, expected: u32 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AncError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        AncError::Config(vec![msg.into()])
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        AncError::Protocol(msg.into())
    }

    /// Short class name, used for CLI exit reporting.
    pub fn class(&self) -> &'static str {
        match self {
            AncError::Config(_) => "config",
            AncError::Protocol(_) => "protocol",
            AncError::Numerical(_) => "numerical",
            AncError::PathBundle { .. } => "path-bundle",
            AncError::Audio { .. } | AncError::SampleRateMismatch { .. } => "audio",
            AncError::Metric(_) => "metric",
            AncError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, AncError>;

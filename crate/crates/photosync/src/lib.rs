//! File formats, configuration files, measurement procedures and the
//! reproduction report built on `photosync-core`.

pub mod config;
pub mod experiment;
pub mod manifest;
pub mod reference;
pub mod report;
pub mod reproduce;
pub mod tagfile;

use photosync_core::{AnalysisError, FitError, ModelError, SimError};

/// Failures of the measurement pipeline and the command-line tool.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(#[from] config::ConfigError),
    #[error("invalid parameters: {0}")]
    Model(#[from] ModelError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("fit: {0}")]
    Fit(#[from] FitError),
    #[error("malformed input: {0}")]
    Format(#[from] tagfile::FormatError),
    #[error("run stopped at the event cap after {events} events; raise sim.event_cap")]
    Truncated { events: u64 },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    Usage(String),
}

impl Error {
    /// True for errors caused by the inputs rather than by the run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::Model(_) | Error::Usage(_) | Error::Format(_) => true,
            Error::Sim(e) => matches!(e, SimError::Config(_) | SimError::NonPositiveDuration),
            _ => false,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

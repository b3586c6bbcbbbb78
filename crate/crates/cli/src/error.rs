//! Exit-code classification: 1 for domain failures, 2 for usage and I/O.

use std::fmt;
use std::process::ExitCode;

use bans_core::checkpoint::CheckpointError;
use bans_core::corpus::CorpusError;
use bans_core::eval::EvalError;
use bans_core::model::ModelError;
use bans_core::text::TextError;
use bans_core::train::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Domain,
    Usage,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn domain(error: impl Into<anyhow::Error>) -> Self {
        Self { kind: Kind::Domain, error: error.into() }
    }

    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { kind: Kind::Usage, error: error.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self.kind {
            Kind::Domain => ExitCode::from(1),
            Kind::Usage => ExitCode::from(2),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Empty => Failure::domain(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<TextError> for Failure {
    fn from(e: TextError) -> Self {
        match e {
            TextError::Io { .. } => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io { .. } => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Io { .. } => Failure::usage(e),
            TrainError::Checkpoint(inner) => inner.into(),
            _ => Failure::domain(e),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::domain(e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::domain(e)
    }
}

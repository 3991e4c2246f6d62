use hyperprobe::data::DataError;
use hyperprobe::eval::EvalError;
use hyperprobe::probes::CheckpointError;
use hyperprobe::train::TrainError;
use hyperprobe::viz::{PcaError, VizError};
use std::fmt;
use std::path::Path;

/// Process exit status, one per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { exit: Exit::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { exit: Exit::Data, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { exit: Exit::Numerical, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        Self::data(format!("checkpoint: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => Self::usage(e.to_string()),
            TrainError::Optim(_) => Self::numerical(e.to_string()),
            TrainError::EmptyCorpus(_) | TrainError::MissingEmbedding(_) | TrainError::Width { .. } => {
                Self::data(e.to_string())
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::OutOfRange { .. } => Self::numerical(e.to_string()),
            EvalError::EmptyGrid => Self::usage(e.to_string()),
            EvalError::Empty | EvalError::MissingEmbedding(_) => Self::data(e.to_string()),
        }
    }
}

impl From<VizError> for CliError {
    fn from(e: VizError) -> Self {
        match e {
            VizError::NoHeads => Self::usage(e.to_string()),
            VizError::Io { .. } => Self::data(e.to_string()),
            VizError::Pca(PcaError::RankZero) => Self::numerical(e.to_string()),
            VizError::Pca(_) => Self::data(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

use crate::costs::CostFileError;
use crate::dataset::DatasetError;
use crate::runtime::RuntimeError;
use crate::tuner::TunerError;
use loopsched_core::bo::BoError;
use loopsched_core::simulator::SimError;

/// Process exit status of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Io = 1,
    Validation = 2,
    Numerical = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Costs(#[from] CostFileError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<DatasetError> for Error {
    fn from(e: DatasetError) -> Self {
        Error::Tuner(TunerError::Dataset(e))
    }
}

impl From<SimError> for Error {
    fn from(e: SimError) -> Self {
        Error::Tuner(TunerError::Sim(e))
    }
}

impl From<BoError> for Error {
    fn from(e: BoError) -> Self {
        Error::Tuner(TunerError::Bo(e))
    }
}

fn dataset_status(e: &DatasetError) -> ExitStatus {
    match e {
        DatasetError::Io { .. } | DatasetError::Locked { .. } => ExitStatus::Io,
        DatasetError::Schema { .. } | DatasetError::UnsupportedVersion { .. } => ExitStatus::Validation,
    }
}

fn bo_status(e: &BoError) -> ExitStatus {
    match e {
        BoError::Gp(_) | BoError::NonFiniteAcquisition { .. } => ExitStatus::Numerical,
        _ => ExitStatus::Validation,
    }
}

impl Error {
    pub fn status(&self) -> ExitStatus {
        match self {
            Error::Tuner(TunerError::Dataset(e)) => dataset_status(e),
            Error::Tuner(TunerError::Bo(e)) => bo_status(e),
            Error::Tuner(TunerError::Sim(_)) => ExitStatus::Validation,
            Error::Costs(CostFileError::Io { .. }) => ExitStatus::Io,
            Error::Costs(_) => ExitStatus::Validation,
            Error::Runtime(RuntimeError::Dataset(e)) => dataset_status(e),
            Error::Runtime(_) => ExitStatus::Validation,
            Error::Usage(_) => ExitStatus::Validation,
            Error::Io { .. } => ExitStatus::Io,
        }
    }
}

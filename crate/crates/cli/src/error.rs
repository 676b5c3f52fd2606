use std::path::{Path, PathBuf};

use crowdcell_core::dataset::DatasetError;
use crowdcell_core::records::RecordError;
use crowdcell_core::segmentation::SegmentationError;
use crowdcell_core::simulation::SimulationError;
use crowdcell_orchestrator::OrchestratorError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn data(path: impl AsRef<Path>, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.as_ref().display()))
    }
}

pub fn from_dataset(path: &Path, e: DatasetError) -> CliError {
    match e {
        DatasetError::MissingFile(p) => CliError::io(p, std::io::ErrorKind::NotFound.into()),
        DatasetError::Io(e) => CliError::io(path, e),
        e => CliError::data(path, e),
    }
}

pub fn from_records(path: &Path, e: RecordError) -> CliError {
    match e {
        RecordError::Io(e) => CliError::io(path, e),
        e => CliError::data(path, e),
    }
}

pub fn from_segmentation(path: &Path, e: SegmentationError) -> CliError {
    match e {
        SegmentationError::InvalidParameter(m) => CliError::Usage(m),
        SegmentationError::Image(image::ImageError::IoError(e)) => CliError::io(path, e),
        e => CliError::data(path, e),
    }
}

pub fn from_simulation(e: SimulationError) -> CliError {
    match e {
        SimulationError::InsufficientWorkers { .. } | SimulationError::InvalidModel(_) => {
            CliError::Usage(e.to_string())
        }
        e => CliError::Data(e.to_string()),
    }
}

pub fn from_orchestrator(e: OrchestratorError) -> CliError {
    match e {
        OrchestratorError::Config(m) => CliError::Usage(m),
        OrchestratorError::Storage(m) => CliError::Io {
            path: PathBuf::from("data_dir"),
            source: std::io::Error::other(m),
        },
        e => CliError::Data(e.to_string()),
    }
}

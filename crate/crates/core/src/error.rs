//! Crate-level error with CLI exit codes.

use thiserror::Error;

use crate::assignment::AssignmentError;
use crate::distance::DistanceError;
use crate::embedding::EmbedError;
use crate::features::FeatureError;
use crate::generators::GenError;
use crate::io::IoError;
use crate::matrix::MatrixError;
use crate::render::RenderError;
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Process exit status for a failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Validation = 2,
    CapExceeded = 3,
    Io = 4,
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Distance(DistanceError::ExactSearchCapExceeded { .. })
            | Error::Features(FeatureError::CapExceeded { .. }) => ExitCode::CapExceeded,
            Error::Io(IoError::Matrix { .. } | IoError::Invalid(_)) => ExitCode::Validation,
            Error::Io(_) => ExitCode::Io,
            _ => ExitCode::Validation,
        }
    }
}

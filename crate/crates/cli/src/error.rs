//! CLI errors and their process exit codes.
//!
//! The code contract: 0 success or passing verification, 1 failed identity
//! verification, 2 usage or configuration problems, 3 data problems. Numeric
//! degeneracies raised while estimating (singular Gram matrix, impossible
//! rescale) count as data problems: the configuration was well-formed, the
//! sample refused it.

use thiserror::Error;

use mixedbias::Error as LibError;

pub const EXIT_IDENTITY_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Every configuration violation found, reported together.
    #[error("configuration error:\n  {}", .violations.join("\n  "))]
    Config { violations: Vec<String> },

    /// Anything wrong with a data file: unreadable, malformed, empty.
    #[error("data error in {path}: {message}")]
    Data { path: String, message: String },

    /// The report could not be written to the requested destination.
    #[error("cannot write report to {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Lib(#[from] LibError),
}

impl CliError {
    pub fn config(violations: Vec<String>) -> Self {
        CliError::Config { violations }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Data { .. } => EXIT_DATA,
            CliError::Output { .. } => EXIT_CONFIG,
            CliError::Lib(err) => classify_lib_error(err),
        }
    }
}

/// Maps a library error to exit 2 (the request was malformed) or exit 3
/// (the data or the numbers derived from it were unusable).
fn classify_lib_error(err: &LibError) -> u8 {
    match err {
        LibError::UnknownFunctional { .. }
        | LibError::MissingBinding { .. }
        | LibError::UnknownColumn { .. }
        | LibError::EmptyBasis
        | LibError::InvalidBasis { .. }
        | LibError::DuplicateFeature { .. }
        | LibError::CoordOutOfRange { .. }
        | LibError::ArityMismatch { .. }
        | LibError::DimensionMismatch { .. }
        | LibError::InvalidNuisanceSpec { .. }
        | LibError::InvalidDgpParam { .. }
        | LibError::InvalidSimulation { .. }
        | LibError::PositivityViolation { .. } => EXIT_CONFIG,
        LibError::EmptyDataset
        | LibError::ColumnLengthMismatch { .. }
        | LibError::NoRows
        | LibError::DuplicateColumn { .. }
        | LibError::NonFiniteValue { .. }
        | LibError::RowOutOfRange { .. }
        | LibError::NonFiniteEvaluation { .. }
        | LibError::SingularSystem { .. }
        | LibError::IllConditionedSystem { .. }
        | LibError::UnsupportedLassoObjective { .. }
        | LibError::NoSolution { .. }
        | LibError::CannotRescale { .. }
        | LibError::IllPosedGamma { .. } => EXIT_DATA,
        LibError::ReplicationFailed { source, .. } => classify_lib_error(source),
    }
}

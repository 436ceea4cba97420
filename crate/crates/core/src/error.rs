use thiserror::Error;

/// Errors raised by the guidance library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The geometry is degenerate (zero-length direction, coincident points).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A configuration violates a structural invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// Obstacles handed to the combiner do not share a velocity.
    #[error(
        "obstacles are not parallel: velocity spread {spread} m/s exceeds tolerance {tol} m/s"
    )]
    NotParallel { spread: f64, tol: f64 },

    /// Scenario text could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A configuration could not be serialized.
    #[error("serialization error: {0}")]
    Serialization(String),

    /// No built-in scenario with that name exists.
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    /// Degenerate geometry encountered while stepping a simulation.
    #[error("degenerate geometry at t = {t} s: {message}")]
    SimulationGeometry { t: f64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn degenerate(msg: impl Into<String>) -> Error {
    Error::DegenerateGeometry(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::InvalidConfiguration(msg.into())
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("limb length mismatch: {what} is {actual:.6} m, expected {expected:.6} m")]
    LengthMismatch {
        what: &'static str,
        actual: f64,
        expected: f64,
    },
    #[error("singular posture: {0}")]
    SingularPosture(&'static str),
    #[error("degenerate posture: {0}")]
    DegeneratePosture(&'static str),
    #[error("jacobian is rank deficient (smallest singular value {0:.3e})")]
    SingularJacobian(f64),
    #[error("joint {joint} never moves over the trajectory")]
    DegenerateTrajectory { joint: &'static str },
    #[error("hand at {distance:.4} m is outside the reachable sphere of radius {reach:.4} m")]
    UnreachableHand { distance: f64, reach: f64 },
    #[error("first hand sample is {offset:.4} m from the initial hand")]
    InitialHandMismatch { offset: f64 },
    #[error("elbow arc does not fit: tangent offset {offset:.4} m exceeds limb length {limb:.4} m")]
    ArcTooLarge { offset: f64, limb: f64 },
    #[error("point coincides with the elbow arc center")]
    AmbiguousProjection,
    #[error("progress scalar {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("path does not cross the elbow region (s spans {min:.3}..{max:.3})")]
    PathDoesNotCrossElbow { min: f64, max: f64 },
    #[error("mixture component {component} collapsed (responsibility mass {mass:.3e})")]
    DegenerateComponent { component: usize, mass: f64 },
    #[error("not enough data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("numerical underflow: {0}")]
    NumericalUnderflow(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("row {row}: {inner}")]
    Row { row: usize, inner: Box<Error> },
}

impl Error {
    /// True for errors caused by violated domain preconditions rather than
    /// numerical breakdown during a computation.
    pub fn is_precondition(&self) -> bool {
        if let Error::Row { inner, .. } = self {
            return inner.is_precondition();
        }
        matches!(
            self,
            Error::LengthMismatch { .. }
                | Error::DegenerateTrajectory { .. }
                | Error::InitialHandMismatch { .. }
                | Error::ArcTooLarge { .. }
                | Error::OutOfRange(_)
                | Error::PathDoesNotCrossElbow { .. }
                | Error::InsufficientData { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidArgument(_)
        )
    }
}

impl Error {
    /// Tags an error with the input row it came from.
    pub fn at_row(self, row: usize) -> Self {
        Error::Row {
            row,
            inner: Box::new(self),
        }
    }

    /// The error with any row tag removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Row { inner, .. } => inner.root(),
            e => e,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point index {index} out of range for {points} space-time points")]
    PointOutOfRange { index: usize, points: usize },

    #[error("unsupported spin dimension {0} (expected 2 or 4)")]
    UnsupportedSpinDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The Gram matrix of the occupied states is not negative definite.
    #[error("span of the states is not negative definite (smallest pivot {pivot:e})")]
    NotNegativeDefinite { pivot: f64 },

    #[error("cannot place {particles} particles: the negative cone has dimension {cone}")]
    ParticleNumberTooLarge { particles: usize, cone: usize },

    #[error("line search stalled at the boundary of the feasible set after {attempts} retractions")]
    StalledAtBoundary { attempts: usize },

    #[error("propagation of block maps is ill-conditioned: {0}")]
    InconclusivePropagation(String),

    #[error("matrix is not special unitary (unitarity defect {unitarity:e}, |det - 1| = {det_defect:e})")]
    NotSpecialUnitary { unitarity: f64, det_defect: f64 },

    #[error("state is not proportional to the reference (relative residual {residual:e})")]
    NotProportional { residual: f64 },

    #[error("subsystem {0} contains no space-time points")]
    EmptySubsystem(usize),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

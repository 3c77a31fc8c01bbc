use alloc::string::String;

/// Errors reported by the simulation kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{qubits} qubits exceed the budget of {limit} qubits")]
    BudgetExceeded { qubits: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("state norm {norm} differs from 1")]
    NotNormalized { norm: f64 },

    #[error("unsupported frame angle {0}; only 0 and pi/2 are allowed")]
    UnsupportedFrameAngle(f64),

    #[error("site {site} out of range for {num_qubits} qubits")]
    SiteOutOfRange { site: usize, num_qubits: usize },

    #[error("exhaustive frame search over {0} qubits exceeds the limit of 16")]
    SearchSpaceExceeded(usize),

    #[error("trace drifted by {drift:e} at t = {time}; reduce the step size (dt = {dt})")]
    TraceDrift { drift: f64, time: f64, dt: f64 },

    #[error("baseline {0:e} is too close to zero for rescaling")]
    UndefinedRatio(f64),

    #[error("operator has zero norm")]
    ZeroOperator,

    #[error("operator is not diagonal in the working basis")]
    NotDiagonal,

    #[error("imaginary part {0:e} of a Hermitian expectation value exceeds tolerance")]
    NonRealExpectation(f64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),

    #[error("strength {strength} is outside the valid range for the {channel} channel")]
    InvalidStrength { channel: &'static str, strength: f64 },

    #[error("time grid must be strictly increasing (index {0})")]
    TimeGridNotIncreasing(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

use thiserror::Error;

use crate::subproblems::PsdAssignment;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which index list of a pair an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Sample,
    Target,
}

impl std::fmt::Display for SetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SetKind::Sample => f.write_str("A"),
            SetKind::Target => f.write_str("B"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("index out of range: pair {pair} set {set} contains {index} but n = {n}")]
    IndexOutOfRange {
        pair: usize,
        set: SetKind,
        index: usize,
        n: usize,
    },

    #[error("empty target: pair {pair} has B = []")]
    EmptyTarget { pair: usize },

    #[error("unsorted indices in pair {pair} set {set}")]
    Unsorted { pair: usize, set: SetKind },

    #[error("duplicate index {index} in pair {pair} set {set}")]
    Duplicate { pair: usize, set: SetKind, index: usize },

    #[error("distribution has no pairs")]
    NoPairs,

    #[error("pair index {index} out of range (m = {m})")]
    PairOutOfRange { index: usize, m: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("estimator weight on index {index} lies outside the sample of pair {pair}")]
    SupportViolation { pair: usize, index: usize },

    #[error("missing observation for index {index}")]
    MissingObservation { index: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data values violate the {regime} bound")]
    OutOfBounds { regime: &'static str },

    #[error("ball of radius^2 {radius_sq} misses the feasible subspace (beta = {beta})")]
    InfeasibleBall { radius_sq: f64, beta: f64 },

    #[error("sdp solver did not converge after {sweeps} sweeps (objective {})", .best.objective)]
    SdpNotConverged {
        sweeps: usize,
        best: Box<PsdAssignment>,
    },

    #[error("no non-expanding certificate: alpha = 0")]
    NoCertificate,

    #[error("population too large for exhaustive search: n = {n} (max {max})")]
    TooLarge { n: usize, max: usize },

    #[error("sample of pair {pair} is not a prefix {{0..t-1}}")]
    NotPrefix { pair: usize },

    #[error("target of pair {pair} is not the full population")]
    NotFullPopulation { pair: usize },

    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },
}

impl Error {
    /// Stable numeric code per error class, used as the CLI exit status.
    pub fn code(&self) -> i32 {
        match self {
            Error::Io(_) => 23,
            Error::Json(_) => 3,
            Error::Csv(_) => 3,
            Error::IndexOutOfRange { .. } => 4,
            Error::EmptyTarget { .. } => 5,
            Error::Unsorted { .. } => 6,
            Error::Duplicate { .. } => 7,
            Error::NoPairs => 8,
            Error::PairOutOfRange { .. } => 9,
            Error::DimensionMismatch { .. } => 10,
            Error::SupportViolation { .. } => 11,
            Error::MissingObservation { .. } => 12,
            Error::NonFinite(_) => 13,
            Error::InvalidArgument(_) => 14,
            Error::OutOfBounds { .. } => 15,
            Error::InfeasibleBall { .. } => 16,
            Error::SdpNotConverged { .. } => 17,
            Error::NoCertificate => 18,
            Error::TooLarge { .. } => 19,
            Error::NotPrefix { .. } => 20,
            Error::NotFullPopulation { .. } => 21,
            Error::Unknown { .. } => 22,
        }
    }
}

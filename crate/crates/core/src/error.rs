use num_complex::Complex64;
use thiserror::Error;

/// Everything that can go wrong inside the laboratory.
///
/// Variants split into two families: configuration problems (the inputs
/// violate an invariant) and numerical failures (the inputs were fine but a
/// computation could not be completed). The CLI maps the first family to exit
/// code 2 and the second to exit code 3.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension k = {0} is too small (need k >= 3)")]
    DimensionTooSmall(usize),
    #[error("shift type nu = {nu} out of range 1..={max}")]
    TypeOutOfRange { nu: usize, max: usize },
    #[error("polynomial degree {0} is too small (need d >= 2)")]
    DegreeTooSmall(usize),
    #[error("polynomial is not monic (leading coefficient {0})")]
    NotMonic(Complex64),
    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("map is not invertible for |a| = {0:e}")]
    NonInvertible(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("orbit escaped at step {step}")]
    Escaped { step: i64 },
    #[error("root solve failed for target {target}")]
    RootSolve { target: Complex64 },
    #[error("filtration radius search failed below R = {0:e}")]
    FiltrationSearch(f64),
    #[error("empty result: {0}")]
    EmptyResult(String),
    #[error("too many dropped samples: {dropped} of {total}")]
    TooManyDrops { dropped: usize, total: usize },
    #[error("point {0} lies outside the plane cover")]
    OutsideCover(Complex64),
    #[error("plane cover is inconsistent: {0}")]
    CoverInconsistent(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by invalid configuration rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionTooSmall(_)
                | Error::TypeOutOfRange { .. }
                | Error::DegreeTooSmall(_)
                | Error::NotMonic(_)
                | Error::DimensionMismatch { .. }
                | Error::NonInvertible(_)
                | Error::InvalidParameter(_)
        )
    }
}

impl Error {
    /// Short stable name of the variant, used in JSON error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionTooSmall(_) => "dimension_too_small",
            Error::TypeOutOfRange { .. } => "type_out_of_range",
            Error::DegreeTooSmall(_) => "degree_too_small",
            Error::NotMonic(_) => "not_monic",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonInvertible(_) => "non_invertible",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Escaped { .. } => "escaped",
            Error::RootSolve { .. } => "root_solve",
            Error::FiltrationSearch(_) => "filtration_search",
            Error::EmptyResult(_) => "empty_result",
            Error::TooManyDrops { .. } => "too_many_drops",
            Error::OutsideCover(_) => "outside_cover",
            Error::CoverInconsistent(_) => "cover_inconsistent",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

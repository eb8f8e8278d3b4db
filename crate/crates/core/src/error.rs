use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rational map: {0}")]
    InvalidMap(String),

    #[error("root finder failed on coefficients {coeffs:?}: {reason}")]
    RootFinder { coeffs: Vec<Complex64>, reason: String },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("critical orbit collides with a critical point at time {time}")]
    CriticalCollision { time: usize },

    #[error("{count} infinite entries in the phi series but only {exclude} may be excluded")]
    TooManyInfinite { count: usize, exclude: usize },

    #[error("no repelling periodic point found to seed inverse iteration")]
    NoRepellingSeed,

    #[error("point {index} ({coords:?}) lies outside the unit box")]
    OutsideUnitBox { index: usize, coords: Vec<f64> },

    #[error("no complement hole found at half radius {half_delta}; refine the Julia grid")]
    NoHole { half_delta: f64 },

    #[error("too few usable samples: {got} (need at least {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("tree properties violated: {0}; run verify_tree_properties for details")]
    TreeProperties(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

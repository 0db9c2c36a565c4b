use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("abscissa {x} is outside the spline domain [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },

    #[error(
        "zero knot lag at difference row {row}: knots coincide across the lag window, \
         weighted difference is undefined"
    )]
    SingularWeight { row: usize },

    #[error(
        "tied quantile knots: levels {level_lo:.6} and {level_hi:.6} map to the same \
         abscissa {value}; lower the interior knot count"
    )]
    TiedQuantiles {
        level_lo: f64,
        level_hi: f64,
        value: f64,
    },

    #[error("knot vector is invalid: {0}")]
    InvalidKnots(String),

    #[error(
        "rank-deficient design at lambda = 0 near basis columns {col_lo}..{col_hi}; \
         add data or use a positive lambda"
    )]
    RankDeficient { col_lo: usize, col_hi: usize },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

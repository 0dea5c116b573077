use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at data row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("no rows")]
    NoRows,

    #[error(
        "data row {row}, column `{column}`: cannot parse `{value}` as a non-negative integer count"
    )]
    NotAnInteger {
        row: usize,
        column: String,
        value: String,
    },

    #[error("data row {row}, column `{column}`: count {value} exceeds max_items {max}")]
    CountExceedsMax {
        row: usize,
        column: String,
        value: u32,
        max: u32,
    },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("empty column")]
    EmptyColumn,

    #[error("length mismatch: x has {x} values, y has {y}")]
    LengthMismatch { x: usize, y: usize },

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("all x values are equal")]
    DegenerateX,

    #[error("{0} coordinate is constant")]
    ConstantCoordinate(&'static str),

    #[error("ties found in {0}; add negligible noise with `jitter` before rank-based operations")]
    Ties(&'static str),

    #[error("ties persist after {0} jitter attempts")]
    JitterTiesPersist(usize),

    #[error("fewer than two distinct x values carry kernel weight at x0 = {x0}")]
    DegenerateWindow { x0: f64 },

    #[error("singular weighted design at x0 = {x0}")]
    SingularDesign { x0: f64 },

    #[error("grid point {index}: {source}")]
    GridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid psi function: {0}")]
    InvalidPsi(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

use thiserror::Error;

/// Reasons a matrix fails to be a valid, irreducible generator.
///
/// Row and column numbers are 1-based to match the command-line conventions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("generator must have at least {min} categories, got {dim}")]
    TooSmall { dim: usize, min: usize },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("off-diagonal negative at ({row},{col}): {value}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum:e}, expected 0")]
    RowSum { row: usize, sum: f64 },
    #[error("not irreducible: support graph is not strongly connected")]
    NotIrreducible,
    #[error("labels: expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular linear system")]
    Singular,
    #[error("numerical consistency failure: {0}")]
    Numerical(String),
    #[error("theta {theta} is below the generator bound {theta_g}")]
    ThetaBelowBound { theta: f64, theta_g: f64 },
    #[error("query sets {first} and {second} overlap")]
    OverlappingSets { first: usize, second: usize },
    #[error("{count} distinct permutations exceed the cap of {cap}")]
    PermutationCap { count: u128, cap: u128 },
    #[error("multinomial coefficient overflows u128")]
    Overflow,
    #[error("precision loss: log-coefficient spread {spread:.1} exceeds {limit}")]
    PrecisionLoss { spread: f64, limit: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

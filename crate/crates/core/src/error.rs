use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row} of the matrix sums to {sum}, expected 1")]
    NonStochastic { row: usize, sum: f64 },
    #[error("transition matrix is not irreducible")]
    Reducible,
    #[error("power iteration did not converge within {iterations} iterations")]
    NonConvergent { iterations: usize },
    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input sequence is empty")]
    EmptyInput,
    #[error("input length {len} exceeds the limit of {limit}")]
    TooLarge { len: usize, limit: usize },
    #[error("enumeration of {count} cylinders exceeds the limit of {limit}")]
    TooDeep { count: f64, limit: f64 },
    #[error("operation requires an i.i.d. base process")]
    WrongBaseVariant,
    #[error("no coincidences observed among {pairs} pairs")]
    ZeroCoincidences { pairs: u64 },
    #[error("need at least 3 distinct regression points, got {points}")]
    DegenerateLadder { points: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

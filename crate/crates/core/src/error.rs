use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("extension degree {0} outside supported range 1..=12")]
    DegreeOutOfRange(u32),

    #[error("polynomial {0:#x} is not irreducible")]
    ReducibleModulus(u32),

    #[error("division by zero in GF(2^{0})")]
    DivisionByZero(u32),

    #[error("element {value} outside field of order {order}")]
    ElementOutOfRange { value: u32, order: usize },

    #[error("invalid code parameters: {0}")]
    InvalidCode(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("prior for symbol {symbol} is not a probability vector (sum {sum})")]
    InvalidPrior { symbol: usize, sum: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("code file line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

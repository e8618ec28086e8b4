use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },

    #[error("neuron index {index} out of range for {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite weights after update")]
    NonFinite,

    #[error("non-finite weights after step {step}")]
    Diverged { step: u64 },

    #[error("sparsity threshold undefined: squared row norm {norm_sq} >= 1")]
    ThresholdUndefined { norm_sq: f64 },

    #[error("row {row} is identically zero; argmax undefined")]
    ZeroRow { row: usize },

    #[error("affine fit needs at least 2 surviving entries, found {survivors}")]
    TooFewSurvivors { survivors: usize },
}

use thiserror::Error;

/// Errors reported by the tracking, generation, and completion routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector dimension does not match what the operation requires.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// An input contains a NaN or infinite entry.
    #[error("non-finite value {value} at position {index} in {context}")]
    NonFinite {
        context: &'static str,
        index: usize,
        value: f64,
    },

    /// An index set entry is out of range or duplicated.
    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    /// A matrix that must have full column rank does not.
    #[error("rank-deficient matrix in {context}: smallest/largest singular value ratio {ratio:.3e}")]
    RankDeficient { context: &'static str, ratio: f64 },

    /// A matrix that must have orthonormal columns does not, within tolerance.
    #[error("columns not orthonormal in {context}: defect {defect:.3e} exceeds {tolerance:.1e}")]
    NotOrthonormal {
        context: &'static str,
        defect: f64,
        tolerance: f64,
    },

    /// A matrix that must be skew-symmetric is not, within tolerance.
    #[error("matrix not skew-symmetric: defect {defect:.3e} exceeds {tolerance:.3e}")]
    NotSkewSymmetric { defect: f64, tolerance: f64 },

    /// A scalar or structural parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

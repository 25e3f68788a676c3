use thiserror::Error;

pub type Result<T, E = WmError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WmError {
    /// Weight evaluated outside of the positive integers.
    #[error("index {0} is outside the domain n >= 1")]
    IndexDomain(usize),

    #[error("series of reciprocal weights diverges for {kind}")]
    Divergent { kind: String },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid element: {0}")]
    InvalidElement(String),

    /// A weight value or a weighted entry is no longer finite.
    #[error("overflow at entry ({i},{j})")]
    Overflow { i: usize, j: usize },

    #[error("duplicate coordinate ({i},{j})")]
    DuplicateCoordinate { i: usize, j: usize },

    #[error("not certified; rho = {rho}")]
    NotCertified { rho: f64 },

    #[error("term budget of {max_terms} exhausted; achievable tail = {achievable_tail:e}")]
    Budget { max_terms: usize, achievable_tail: f64 },

    #[error("not quasi-invertible: I - T is numerically singular (condition estimate {condition:e})")]
    NotQuasiInvertible { condition: f64 },

    #[error("unsupported algebra: {0}")]
    UnsupportedAlgebra(String),

    #[error("format error: {0}")]
    Format(String),
}

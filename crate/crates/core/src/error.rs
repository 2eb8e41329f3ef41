use thiserror::Error;

/// Errors produced by box construction, protocol handling and inequality generation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("setting pair (alpha={alpha}, beta={beta}) sums to {sum}, expected 1")]
    Normalization { alpha: usize, beta: usize, sum: f64 },

    #[error("box is signaling: {0}")]
    Signaling(String),

    #[error("negative probability {value} at (a={a}, b={b}, alpha={alpha}, beta={beta})")]
    NegativeProbability {
        a: usize,
        b: usize,
        alpha: usize,
        beta: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid bias table: {0}")]
    InvalidBias(String),

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("invalid Collins-Gisin table: {0}")]
    InvalidCg(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("alphabet mismatch: expected d={expected}, got d={got}")]
    AlphabetMismatch { expected: usize, got: usize },

    #[error("invalid arity: {0}")]
    InvalidArity(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("phase index t={t} outside 1..={max}")]
    InvalidPhaseIndex { t: usize, max: usize },

    #[error("epsilon {0} outside [-1, 1]")]
    InvalidEpsilon(f64),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("channel is degenerate (e_c = 0); the ratio is undefined")]
    DegenerateChannel,
}

pub type Result<T> = std::result::Result<T, Error>;

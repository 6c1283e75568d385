use thiserror::Error;

/// Errors raised by the construction and its verification paths.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sector: {0}")]
    Domain(String),

    #[error("binomial coefficient overflows 64 bits: C({n}, {r})")]
    BinomialOverflow { n: usize, r: usize },

    #[error("coincident magnon momenta: |x_{a} - x_{b}| below relative tolerance")]
    DegenerateMomenta { a: usize, b: usize },

    #[error("overlap matrix not positive definite in sector r={r}, k={k} (minor {minor})")]
    NotPositiveDefinite { r: usize, k: usize, minor: usize },

    #[error("rank deficiency: extended overlap residual {residual:.3e} in sector r={r}, k={k}")]
    RankMismatch { r: usize, k: usize, residual: f64 },

    #[error("gate completion failed in charge sector q={q} of gate {k}: residual {residual:.3e}")]
    Completion { k: usize, q: usize, residual: f64 },

    #[error("matchgate parameter extraction: vanishing diagonal v at column {j}")]
    VanishingDiagonal { j: usize },

    #[error("gauge solve failed: {0}")]
    Gauge(String),

    #[error("invalid system: {0}")]
    System(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

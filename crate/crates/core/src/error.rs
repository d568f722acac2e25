use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Block structure or matrix shapes do not fit together.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input fails a mathematical precondition (not a state, not unimodular, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("state is not faithful: {0}")]
    NotFaithful(String),

    #[error("representation not supported: {0}")]
    UnsupportedRepresentation(String),

    /// The contraction inequality `φ((Tx)*(Tx)) ≤ φ(x*x)` does not hold.
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("no invariant normal state: {0}")]
    NoInvariantState(String),

    #[error("generators do not commute: {0}")]
    NonCommuting(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Results contradict each other in a way that a passing hypothesis rules out.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    /// A W*-dynamical-system axiom required by the analysis fails.
    #[error("refused: {axiom} fails ({detail})")]
    Refused { axiom: String, detail: String },

    #[error("unsupported map: {0}")]
    UnsupportedMap(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

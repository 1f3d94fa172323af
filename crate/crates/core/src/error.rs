use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariate dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset contains no pairs")]
    EmptyDataset,

    #[error("no discordant pairs: the conditional likelihood is undefined")]
    NoDiscordantPairs,

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("Gauss-Hermite order {order} out of range 1..=128")]
    QuadratureOrder { order: u32 },

    #[error("optimizer failed to converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("separation: the likelihood is maximized on the parameter boundary")]
    Separation,

    #[error("degenerate propensity model: {0}")]
    PropensityDegenerate(String),

    #[error("information matrix is numerically singular")]
    SingularSigma,

    #[error("quadrature for the group-effect integral did not converge")]
    NonIntegrable,

    #[error("all {0} replications failed")]
    AllReplicationsFailed(usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{0}")]
    Precondition(String),

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("input file is empty")]
    EmptyFile,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

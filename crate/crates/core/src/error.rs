use thiserror::Error;

/// Errors raised across the crate.
///
/// Sampling-based decisions surface their failure modes explicitly so the
/// flatness driver can fold them into an inconclusive verdict instead of a
/// definite negative.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("rank instability: {0}")]
    RankInstability(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("straightening failed: {0}")]
    Straighten(String),
    #[error("inversion failed: {0}")]
    Inversion(String),
    #[error("not input-affine: {0}")]
    NotAffine(String),
    #[error("PAI normalization is not affine in the new input: {0}")]
    Affinity(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("symbolic lifting failed: {0}")]
    Lift(String),
    #[error("redundant inputs: {0}")]
    RedundantInput(String),
    #[error("derivative order exceeded: {0}")]
    OrderExceeded(String),
    #[error("closure did not stabilize: {0}")]
    Closure(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the failure is structural (a definite negative for the branch)
    /// rather than a limitation of the symbolic machinery or the sampler.
    pub fn is_definite(&self) -> bool {
        matches!(self, Error::NoSolution(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

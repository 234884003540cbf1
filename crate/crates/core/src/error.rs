use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Poisson intensity too large to simulate in bounded time.
    #[error("complexity guard violated: Poisson mean {mean:e} exceeds {limit:e}")]
    ComplexityGuard { mean: f64, limit: f64 },

    #[error("chain diverged at step {step}: |x| = {norm:e}")]
    Divergence { step: u64, norm: f64 },

    #[error("test function `{0}` returned a non-finite value")]
    PoisonedAccumulator(String),

    #[error("unknown test function `{0}`")]
    UnknownFunction(String),

    #[error("empirical measure has zero weight mass")]
    EmptyMeasure,

    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

use thiserror::Error;

/// Errors raised by the laboratory. The CLI maps [`DomlabError::Config`]
/// to exit code 2 and every other variant to exit code 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomlabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("newton inverse did not converge after {iterations} steps (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("orbit left the representable range at step {step}")]
    Overflow { step: usize },

    #[error("splitting not resolvable: singular-value gap {gap:.3e} < {required}")]
    SplittingNotResolvable { gap: f64, required: f64 },

    #[error("splitting equivariance residual {residual:.3e} exceeds {limit:.1e}")]
    SplittingResidual { residual: f64, limit: f64 },

    #[error("no splitting frame within {radius:.1e} of the query point")]
    NoFrame { radius: f64 },

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("severe undersampling: {distinct} distinct words for {samples} samples")]
    Undersampled { distinct: usize, samples: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("delta0 violated: {0}")]
    DeltaViolated(String),

    #[error("delta1 too large: {0}")]
    RebaseRadius(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl DomlabError {
    pub fn is_config(&self) -> bool {
        matches!(self, DomlabError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, DomlabError>;

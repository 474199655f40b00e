use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("entropy `{entropy}` does not provide derivative of order {order}")]
    MissingDerivative { entropy: String, order: usize },

    #[error("time step {dt} exceeds the stability limit {limit}")]
    Unstable { dt: f64, limit: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("diffusion matrix is not positive definite at {0:?}")]
    SingularDiffusion(Vec<f64>),

    #[error("Θ asymmetry {asymmetry:e} at {at:?}")]
    Asymmetric { asymmetry: f64, at: Vec<f64> },

    #[error("model `{0}` does not have an identity diffusion matrix")]
    NotIdentityDiffusion(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("decay fit needs at least 4 usable snapshots, found {0}")]
    TooFewSnapshots(usize),

    #[error("entropy is not positive at t = {0}")]
    NonPositiveEntropy(f64),

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("time grid mismatch: {0}")]
    TimeMismatch(String),

    #[error("divergence condition violated, residual {0:e}")]
    DivergenceCondition(f64),

    #[error("weight α = {value} outside [0, 1] at {at:?}")]
    AlphaOutOfRange { value: f64, at: Vec<f64> },

    #[error("bump constraint violated: {0}")]
    BumpConstraint(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    /// Whether the error stems from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unstable { .. }
                | Error::NonFinite(_)
                | Error::SingularDiffusion(_)
                | Error::Asymmetric { .. }
                | Error::NonPositiveEntropy(_)
                | Error::TooFewSnapshots(_)
                | Error::DegenerateEnsemble(_)
        )
    }
}

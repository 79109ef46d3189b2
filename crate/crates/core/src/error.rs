use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel queried outside its domain: t = {t} < tau = {tau}")]
    KernelDomain { t: f64, tau: f64 },

    #[error("kernel kind mismatch: {0}")]
    KernelKind(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("point is off the switching surface: |s(x)| = {norm:e} > tol = {tol:e}")]
    OffSurface { norm: f64, tol: f64 },

    #[error("feedback law does not admit a set-valued description: {0}")]
    UnsupportedFeedback(String),

    #[error("state left the finite range at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("unstable explicit step: {0}")]
    Stability(String),

    #[error("infeasible design: {0}")]
    Infeasible(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("not in sliding mode: {0}")]
    NotSliding(String),

    #[error("degenerate output: {0}")]
    Degenerate(String),

    #[error("design condition violated: {0}")]
    Condition(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

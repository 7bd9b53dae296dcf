use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants map to the failure classes callers are expected to branch on;
/// the CLI serializes them via [`BoatError::kind`].
#[derive(Debug, Error)]
pub enum BoatError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("separation: {0}")]
    Separation(String),

    #[error("matching infeasible: {0}")]
    Infeasible(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("rank deficient design: {0}")]
    Rank(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("not identified: {0}")]
    Identification(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("scaling error: {0}")]
    Scaling(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BoatError {
    /// Stable machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            BoatError::Domain(_) => "domain",
            BoatError::Contract(_) => "contract",
            BoatError::Initialization(_) => "initialization",
            BoatError::Separation(_) => "separation",
            BoatError::Infeasible(_) => "infeasible",
            BoatError::Estimation(_) => "estimation",
            BoatError::Positivity(_) => "positivity",
            BoatError::Rank(_) => "rank",
            BoatError::InsufficientData(_) => "insufficient_data",
            BoatError::Identification(_) => "identification",
            BoatError::Schema(_) => "schema",
            BoatError::Scaling(_) => "scaling",
            BoatError::Validation(_) => "validation",
            BoatError::Io(_) => "io",
            BoatError::Csv(_) => "schema",
            BoatError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, BoatError>;

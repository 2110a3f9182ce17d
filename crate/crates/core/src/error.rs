use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |M - M^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max |U^H U - 1| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("all Rabi frequencies vanish; the dark manifold is undefined")]
    DegenerateCoupling,

    #[error("gauge discontinuity detected in finite differences (residual {residual:e})")]
    GaugeDiscontinuity { residual: f64 },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("step-size failure: norm drift {drift:e} exceeds tolerance")]
    StepSizeFailure { drift: f64 },

    #[error("not converged: doubling the resolution changed the result by {change:e}")]
    NotConverged { change: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("inconsistent populations: {0}")]
    InconsistentPopulations(String),

    #[error("ill-conditioned reconstruction: {0}")]
    IllConditioned(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

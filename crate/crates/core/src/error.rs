use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CFL violation: dt = {dt:e} exceeds bound {bound:e} (safety * h / max(1, |u|_inf))")]
    Cfl { dt: f64, bound: f64 },

    #[error("step guard: dt = {dt:e} exceeds bound {bound:e} (safety * min(delta, h / |u|_inf))")]
    StepGuard { dt: f64, bound: f64 },

    #[error("non-finite state at t = {t:e}: {detail}")]
    NonFinite { t: f64, detail: String },

    #[error("time {t:e} outside interpolation window [{start:e}, {end:e}]")]
    TimeWindow { t: f64, start: f64, end: f64 },

    #[error("forcing gap: no reference data covering t = {0:e}")]
    ForcingGap(f64),

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    #[error("certificate violation: {0}")]
    Certificate(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("config: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable, machine-parsable class name used by the CLI error line.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::RankMismatch { .. } => "rank_mismatch",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Unsupported(_) => "unsupported",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Cfl { .. } => "cfl",
            Error::StepGuard { .. } => "step_guard",
            Error::NonFinite { .. } => "non_finite",
            Error::TimeWindow { .. } => "time_window",
            Error::ForcingGap(_) => "forcing_gap",
            Error::InsufficientPoints(_) => "insufficient_points",
            Error::Certificate(_) => "certificate",
            Error::Diverged(_) => "diverged",
            Error::Config(_) => "config",
            Error::CheckFailed(_) => "check_failed",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

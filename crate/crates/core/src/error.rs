use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate model is negative ({min_value:.3e}) at t = {at:.6}")]
    NegativeRate { min_value: f64, at: f64 },

    #[error("duplicate or non-positive frequency {0}")]
    InvalidFrequency(f64),

    #[error("frequency {freq} exceeds band limit {band}")]
    OutOfBand { freq: f64, band: f64 },

    #[error("rate {rate} at t = {at} exceeds the thinning bound {bound}")]
    BoundViolated { rate: f64, bound: f64, at: f64 },

    #[error("event file parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("horizon mismatch: events on [0, {events}] but window on [0, {window}]")]
    HorizonMismatch { events: f64, window: f64 },

    #[error("{0} window is not supported here")]
    UnsupportedWindow(&'static str),

    #[error("no events observed")]
    NoEvents,

    #[error("empty frequency grid")]
    EmptyGrid,

    #[error("gram matrix is numerically singular (condition {condition:.3e})")]
    SingularGram { condition: f64 },

    #[error("coefficient estimates are not conjugate-symmetric (defect {defect:.3e})")]
    NotConjugate { defect: f64 },

    #[error("more than {cap} frequencies selected; threshold too low for this data")]
    CapExceeded { cap: usize },

    #[error("every candidate fit has a non-positive rate")]
    DegenerateFit,

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

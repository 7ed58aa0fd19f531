use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate column")]
    DegenerateColumn,
    #[error("coherence threshold unsatisfiable (column {column} exceeded {attempts} attempts)")]
    CoherenceUnsatisfiable { column: usize, attempts: u64 },
    #[error("empty mixture")]
    EmptyMixture,
    #[error("mixture invisible at receiver (column {0})")]
    InvisibleMixture(usize),
    #[error("insufficient molecules: need {needed}, have {available}")]
    InsufficientMolecules { needed: usize, available: usize },
    #[error("interval end {t1} precedes start {t0}")]
    BadInterval { t0: f64, t1: f64 },
    #[error("oracle size guard: {0}")]
    OracleGuard(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable kebab-case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParam(_) => "invalid-param",
            Error::Dimension(_) => "dimension",
            Error::DegenerateColumn => "degenerate-column",
            Error::CoherenceUnsatisfiable { .. } => "coherence-unsatisfiable",
            Error::EmptyMixture => "empty-mixture",
            Error::InvisibleMixture(_) => "invisible-mixture",
            Error::InsufficientMolecules { .. } => "insufficient-molecules",
            Error::BadInterval { .. } => "bad-interval",
            Error::OracleGuard(_) => "oracle-guard",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Parse(_) => "parse",
        }
    }
}

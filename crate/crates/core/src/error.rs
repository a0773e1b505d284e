use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("grid sizing: {0}")]
    Sizing(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("order statistic Y_(K+1) = {threshold} is not strictly positive")]
    NonpositiveThreshold { threshold: f64 },

    #[error("degenerate sample: top {count} order statistics are all equal")]
    DegenerateSample { count: usize },

    #[error("invalid size: {0}")]
    Size(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("insufficient neighborhood: {selected} observations within bandwidth, need {needed}")]
    InsufficientNeighborhood { selected: usize, needed: usize },

    #[error("degenerate quantile spread: {0}")]
    DegenerateSpread(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("too many failed splits: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InsufficientData(_) => "insufficient_data",
            Error::Sizing(_) => "sizing",
            Error::Shape(_) => "shape",
            Error::NonpositiveThreshold { .. } => "nonpositive_threshold",
            Error::DegenerateSample { .. } => "degenerate_sample",
            Error::Size(_) => "size",
            Error::Domain(_) => "domain",
            Error::Usage(_) => "usage",
            Error::InsufficientNeighborhood { .. } => "insufficient_neighborhood",
            Error::DegenerateSpread(_) => "degenerate_spread",
            Error::Schema(_) => "schema",
            Error::EmptyData(_) => "empty_data",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),

    #[error("insufficient data: need {needed}, have {available} ({what})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("empty series: {0}")]
    EmptySeries(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Csv(_) | Error::EmptySeries(_) | Error::Io(_) => 3,
            Error::InsufficientData { .. } => 3,
            Error::Domain(_)
            | Error::Degenerate(_)
            | Error::NoConvergence(_)
            | Error::Numerical(_)
            | Error::Json(_) => 4,
        }
    }

    /// Short machine-readable tag for error summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::NoConvergence(_) => "no_convergence",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::EmptySeries(_) => "empty_series",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

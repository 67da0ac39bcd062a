use alloc::string::String;

/// Errors produced anywhere in the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("domain error in {op}: non-positive input at index {index}")]
    Domain { op: &'static str, index: usize },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("no question templates remain")]
    Exhausted,

    #[error("guessing state renormalization underflow (sum {sum:e})")]
    Renormalization { sum: f64 },

    #[error("empty report: {0}")]
    EmptyReport(String),
}

impl Error {
    /// Short machine-parsable category, used for CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Domain { .. } => "domain",
            Error::NonFinite { .. } => "non-finite",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Protocol(_) => "protocol",
            Error::Exhausted => "exhausted",
            Error::Renormalization { .. } => "renormalization",
            Error::EmptyReport(_) => "empty-report",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn dim_err(op: &'static str, detail: String) -> Error {
    Error::Dimension { op, detail }
}

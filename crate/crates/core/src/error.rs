use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty sample set")]
    EmptySamples,

    #[error("value outside numeric domain: {0}")]
    NumericDomain(String),

    #[error("subproblem `{block}` infeasible (phase-1 slack {slack:.3e})")]
    Infeasible { block: &'static str, slack: f64 },

    #[error("optimization aborted: subproblem `{block}` infeasible after {} iterations", trace.iterations.len())]
    Aborted {
        block: &'static str,
        slack: f64,
        trace: Box<crate::bcd::BcdTrace>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

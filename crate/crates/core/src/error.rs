//! Crate-wide error type.

use thiserror::Error;

/// All failure modes surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor shapes or extents.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-side contract was violated.
    #[error("contract error: {0}")]
    Contract(String),

    /// A guarded operation refused to run (e.g. oracle size cap).
    #[error("refused: {0}")]
    Refusal(String),

    /// NaN or Inf produced during forward or backward, tagged with the op.
    #[error("non-finite value in op `{op}`: {detail}")]
    NonFinite { op: &'static str, detail: String },

    /// Dataset indexing failure; every offending record listed.
    #[error("dataset errors:\n  {}", .0.join("\n  "))]
    Dataset(Vec<String>),

    /// Metric has no defined value for the given inputs.
    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    /// Malformed file contents (image, config, checkpoint).
    #[error("format error: {0}")]
    Format(String),

    /// Unknown feature name in a spectrum dump request.
    #[error("unknown feature `{name}`; valid names: {valid}")]
    UnknownFeature { name: String, valid: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

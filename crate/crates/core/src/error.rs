use thiserror::Error;

use crate::verdict::Verdict;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An index or symbol outside its admissible range.
    #[error("{what} = {value} is out of range {range}")]
    Range {
        what: &'static str,
        value: String,
        range: String,
    },

    /// A point that does not belong to the phase space.
    #[error("point {point:?} lies outside the {space} space")]
    Domain { point: Vec<f64>, space: String },

    /// A bad numeric parameter or malformed descriptor.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The computation would exceed a configured cap.
    #[error("{what} needs {required}, above the configured cap {cap}; {advice}")]
    Resource {
        what: &'static str,
        required: u128,
        cap: u128,
        advice: &'static str,
    },

    /// An input failed a classification it is required to pass.
    #[error("precondition failed: {}", .0.summary())]
    Precondition(Box<Verdict>),

    /// A serialized artifact does not match its checksum or cached data.
    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn range(what: &'static str, value: impl ToString, range: impl ToString) -> Self {
        Error::Range {
            what,
            value: value.to_string(),
            range: range.to_string(),
        }
    }
}

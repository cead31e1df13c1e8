use thiserror::Error;

/// Errors raised by the estimation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric parameter violates a documented precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("support {support} has {size} coordinates, more than s = {s}")]
    SupportTooLarge {
        support: String,
        size: usize,
        s: usize,
    },

    #[error("support {0} appears more than once")]
    DuplicateSupport(String),

    #[error("structure violates the {rule} family rule: {detail}")]
    FamilyViolation { rule: String, detail: String },

    #[error("atom support {0} is not part of the structure")]
    AtomMismatch(String),

    #[error("index {index} is not admissible: {reason}")]
    ClassViolation { index: String, reason: String },

    /// Enumeration would exceed a hard ceiling.
    #[error("capacity exceeded: {what} requires {requested} objects, ceiling is {ceiling}")]
    Capacity {
        what: String,
        requested: String,
        ceiling: u64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn capacity(
        what: impl Into<String>,
        requested: impl ToString,
        ceiling: u64,
    ) -> Self {
        Error::Capacity {
            what: what.into(),
            requested: requested.to_string(),
            ceiling,
        }
    }
}

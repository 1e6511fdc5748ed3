use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point} is outside the domain of size {domain_size}")]
    Domain { point: usize, domain_size: usize },

    #[error("domain mismatch: expected size {expected}, found {found}")]
    DomainMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid hypothesis class: {0}")]
    Class(String),

    #[error("no subset of at least {min_size} users in a group of {group_size} has a consistent classifier")]
    NoConsistentGroup { group_size: usize, min_size: usize },

    #[error(
        "exponential search cap: group of {group_size} users exceeds max_candidate_group = {cap}"
    )]
    SearchCap { group_size: usize, cap: usize },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

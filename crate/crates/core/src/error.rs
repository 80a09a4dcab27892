//! Error types shared across the workspace.

use thiserror::Error;

/// Problems with a universe configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(String),
    #[error("`{0}` is declared both static and mobile")]
    Disjointness(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("`{0}` is a reserved word")]
    ReservedName(String),
    #[error("`{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("domain of `{0}` mixes integers and channel names")]
    MixedDomain(String),
    #[error("bound must be at least 1, got {0}")]
    BadBound(usize),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("`{0}` cannot be carried: only mobile channels move")]
    NotMobile(String),
    #[error("static channel `{0}` cannot carry channel names")]
    StaticCarrier(String),
    #[error("initial value of `{0}` is outside its declared domain")]
    InitOutOfDomain(String),
    #[error("universe too large: {what} is {actual}, limit {limit}")]
    TooLarge {
        what: &'static str,
        actual: usize,
        limit: usize,
    },
}

/// A positioned diagnostic from the process-text parser or its name
/// resolution pass.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

/// Runtime failures of engine operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("observation sets belong to different universes")]
    UniverseMismatch,
    #[error("universe too large for the oracle: {events} events (limit {max_events}), bound {bound} (limit {max_bound})")]
    UniverseTooLarge {
        events: usize,
        max_events: usize,
        bound: usize,
        max_bound: usize,
    },
    #[error("`{0}` is used on both sides of a parallel composition")]
    SharedVariable(String),
    #[error("not a prefix of the target trace")]
    NotAPrefix,
    #[error("{0} is a predicate on rows, not a closure")]
    NotAClosure(&'static str),
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("malformed observation row: {0}")]
    BadRow(String),
}

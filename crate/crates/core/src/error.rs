use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("unknown profile: {0}")]
    UnknownProfile(String),
    #[error("corrupt catalog: {0}")]
    CorruptCatalog(String),
    #[error("non-monotonic trace at index {0}")]
    NonMonotonicTrace(usize),
    #[error("bad template in intent '{intent}': {detail}")]
    BadTemplate { intent: String, detail: String },
    #[error("insufficient suggestions: {0} suggestible intents, need 3")]
    InsufficientSuggestions(usize),
    #[error("invalid intent set: {0}")]
    InvalidIntents(String),
    #[error("invalid food-day calendar: {0}")]
    InvalidCalendar(String),
    #[error("unknown session: {0}")]
    UnknownSession(String),
    #[error("empty inquiry")]
    EmptyInquiry,
    #[error("phase regression: {from} -> {to}")]
    PhaseRegression { from: String, to: String },
    #[error("unknown log position: {0}")]
    UnknownPosition(u64),
    #[error("fallback immutable: turn {0} was a fallback and cannot be relabeled")]
    FallbackImmutable(u64),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("empty window")]
    EmptyWindow,
    #[error("invalid opening hours: {0}")]
    InvalidHours(String),
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("request {id}: {reason}")]
    InvalidRequest { id: u64, reason: String },

    #[error("duplicate request id {0}")]
    DuplicateRequest(u64),

    /// The request can never be served on this cluster. Recorded by the
    /// engine and skipped, never fatal.
    #[error("request {id} rejected: {reason}")]
    Rejected { id: u64, reason: String },

    #[error("clock inversion for request {id}: now {now} precedes submit time {submit}")]
    ClockInversion { id: u64, now: f64, submit: f64 },

    #[error("request {0} is not in the serving set")]
    NotServing(u64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("no progress possible: request {id} is blocked with nothing running")]
    NoProgress { id: u64 },

    #[error("invalid cluster: {0}")]
    InvalidCluster(String),

    #[error("invalid policy name {0:?}")]
    UnknownPolicy(String),

    #[error("invalid scheduler name {0:?}")]
    UnknownScheduler(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("cannot generate {class} requests: {reason}")]
    Workload { class: String, reason: String },

    #[error("trace line {line}: {message}")]
    Trace { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("metrics: {0}")]
    Metrics(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

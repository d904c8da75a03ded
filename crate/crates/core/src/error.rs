use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("cut {cut} on node {node} leaves an empty child")]
    DegenerateCut { node: usize, cut: String },

    #[error("node {0} is not a leaf")]
    NotALeaf(usize),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("assignment does not match tree: {0}")]
    AssignmentMismatch(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("workload is empty")]
    EmptyWorkload,

    #[error("online bound violated: C(T)={c_t}, OPT={opt}, bound={bound}")]
    BoundViolation { c_t: u64, opt: u64, bound: f64 },

    #[error("unsupported query shape: {0}")]
    UnsupportedQueryShape(String),

    #[error("non-finite loss at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },

    #[error("small leaf {0} has no neighbouring large leaf")]
    NoNeighbor(usize),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    }
}

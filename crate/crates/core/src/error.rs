use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate {kind} id `{id}` at {location}")]
    DuplicateId {
        kind: &'static str,
        id: String,
        location: String,
    },
    #[error("edge `{edge}` at {location} references unknown {endpoint} vertex `{vertex}`")]
    DanglingEndpoint {
        edge: String,
        endpoint: &'static str,
        vertex: String,
        location: String,
    },
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("vertex set is not a connected maximal component: {0}")]
    NotAComponent(String),
    #[error("structure theorem not applicable: {0}")]
    NotApplicable(String),
    #[error("level structure violated at vertex `{vertex}`: {reason}")]
    LevelViolation { vertex: String, reason: String },
    #[error("directed cycle through vertex `{0}`")]
    DirectedCycle(String),
    #[error("missing sink dimension for vertex `{0}`")]
    MissingSinkDim(String),
    #[error("zero dimension requested for vertex `{0}`")]
    ZeroDim(String),
    #[error("branching system keys do not match the graph: {0}")]
    KeyMismatch(String),
    #[error("invalid branching system: {0}")]
    InvalidSystem(String),
    #[error("universe of size {size} exceeds the dense matrix limit {limit}")]
    UniverseTooLarge { size: usize, limit: usize },
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("rank mismatch on edge `{edge}`: dim H_r(e) = {range_dim}, dim H_e = {edge_dim}")]
    RankMismatch {
        edge: String,
        range_dim: usize,
        edge_dim: usize,
    },
    #[error("basis-to-basis condition fails on edge `{0}`")]
    B2bViolation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn malformed(err: &serde_json::Error) -> Self {
        Error::Malformed {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

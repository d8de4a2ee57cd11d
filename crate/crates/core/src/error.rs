use crate::structure::Vertex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("relation {relation}: hyperedge {edge:?} has {got} vertices, arity is {arity}")]
    ArityMismatch {
        relation: String,
        edge: Vec<Vertex>,
        arity: usize,
        got: usize,
    },

    #[error("relation {relation}: irreflexivity violated by hyperedge {edge:?}")]
    Irreflexive { relation: String, edge: Vec<Vertex> },

    #[error("vertex {vertex} out of range for universe of size {n}{}", context_suffix(.context))]
    VertexOutOfRange {
        vertex: Vertex,
        n: usize,
        context: Option<String>,
    },

    #[error("extension is not strong")]
    NotStrong,

    #[error("extension is not intrinsic")]
    NotIntrinsic,

    #[error("base correspondence is not an isomorphism: {0}")]
    NotIsomorphism(String),

    #[error("pattern adds {0} vertices; at most {1} are supported")]
    PatternTooLarge(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" (in {c})"),
        None => String::new(),
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("invalid complex:\n{0}")]
    Invalid(String),

    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),

    #[error("vertex {0} is not in the vertex boundary of the given set")]
    NotInVertexBoundary(usize),

    #[error("field has {got} values, complex has {expected} vertices")]
    FieldSize { expected: usize, got: usize },

    #[error("degenerate values: adjacent vertices share a g-value (vertices {vertices:?}, edges {edges:?})")]
    Degenerate { vertices: Vec<usize>, edges: Vec<usize> },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("consistency failure: {0}")]
    Consistency(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("mode/connectivity mismatch: mode {mode} needs {needs}, input has m = {m}")]
    ModeMismatch { mode: String, needs: String, m: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn degenerate_edges(complex: &crate::PlanarComplex, mut edges: Vec<usize>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut vertices: Vec<usize> = edges.iter().flat_map(|&e| complex.edges()[e]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        Error::Degenerate { vertices, edges }
    }
}

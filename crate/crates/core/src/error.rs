use thiserror::Error;

/// Errors raised while building meshes, operators and systems, or while solving.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfdError {
    #[error("points are collinear: {0:?}, {1:?}, {2:?}")]
    CollinearPoints([f64; 2], [f64; 2], [f64; 2]),

    #[error("triangle {triangle} violates the empty-circumcircle property (vertex {vertex} lies inside)")]
    NotDelaunay { triangle: usize, vertex: usize },

    #[error("circumcenter of triangle {triangle} is not strictly inside it (min barycentric {min_barycentric:.3e})")]
    DegenerateDual { triangle: usize, min_barycentric: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-finite input to quadrature{}", entity_suffix(.entity))]
    NonfiniteInput { entity: Option<String> },

    #[error("quadrature produced a non-positive average {value:e}{}", entity_suffix(.entity))]
    NonpositiveAverage { value: f64, entity: Option<String> },

    #[error("diffusion coefficient {value:e} is not positive at ({}, {})", .at[0], .at[1])]
    NonpositiveDiffusion { value: f64, at: [f64; 2] },

    #[error("reaction coefficient vanishes on every edge; the curl-curl kernel makes the vector system singular")]
    SingularReaction,

    #[error("problem kind mismatch: expected {expected}")]
    KindMismatch { expected: &'static str },

    #[error("matrix is singular (zero pivot at step {0})")]
    SingularMatrix(usize),

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

fn entity_suffix(entity: &Option<String>) -> String {
    match entity {
        Some(e) => format!(" at {e}"),
        None => String::new(),
    }
}

impl MfdError {
    /// Attach a mesh entity label to quadrature errors.
    pub fn at_entity(self, label: impl Into<String>) -> Self {
        match self {
            MfdError::NonfiniteInput { .. } => MfdError::NonfiniteInput {
                entity: Some(label.into()),
            },
            MfdError::NonpositiveAverage { value, .. } => MfdError::NonpositiveAverage {
                value,
                entity: Some(label.into()),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for MfdError {
    fn from(e: std::io::Error) -> Self {
        MfdError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for MfdError {
    fn from(e: serde_json::Error) -> Self {
        MfdError::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MfdError>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh input: {0}")]
    InvalidMesh(String),

    #[error("degenerate triangle with area {area:e}")]
    DegenerateTriangle { area: f64 },

    #[error("unsupported quadrature degree {degree} for {shape}")]
    UnsupportedDegree { shape: &'static str, degree: usize },

    #[error("invalid stabilisation setting: {0}")]
    InvalidStabilization(String),

    #[error("point ({x}, {y}) lies outside the domain of the exact solution")]
    Domain { x: f64, y: f64 },

    #[error("missing Dirichlet data for boundary node {node}")]
    MissingDirichlet { node: usize },

    #[error("linear solve failed: {reason} (relative residual {residual:e})")]
    Solver { reason: String, residual: f64 },

    #[error("{0}")]
    Analysis(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid run configuration: {0}")]
    RunConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

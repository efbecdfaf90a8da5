use thiserror::Error;

pub type Result<T> = std::result::Result<T, ClupError>;

#[derive(Debug, Error)]
pub enum ClupError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("radius {radius} is below the box least-squares optimum {min_residual}")]
    Infeasible { radius: f64, min_residual: f64 },

    #[error("{solver} hit its iteration cap (kkt residual {kkt_residual:.3e})")]
    IterLimit {
        solver: &'static str,
        kkt_residual: f64,
    },

    #[error("iterate {k} has zero norm")]
    DegenerateIterate { k: usize },

    #[error("saddle point search failed: {0}")]
    Bracketing(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

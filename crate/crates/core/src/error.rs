use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {y} lies outside the domain of profile `{profile}`")]
    OutOfDomain { profile: String, y: f64 },

    #[error("derivative of order {order} unavailable (profile `{profile}` provides up to {max})")]
    OrderUnavailable {
        profile: String,
        order: usize,
        max: usize,
    },

    #[error("grid is empty")]
    EmptyGrid,

    #[error("profile is degenerate near y = {y}: v' vanishes on a whole subinterval")]
    DegenerateProfile { y: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("zero vector supplied where a nonzero vector is required")]
    ZeroVector,

    #[error("vector does not decay at the truncation edges (edge/max = {ratio:e})")]
    EdgeNotDecayed { ratio: f64 },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("no convergence after {iterations} iterations (best estimate {best})")]
    NoConvergence { iterations: usize, best: f64 },

    #[error("fit window contains {found} checkpoints, need at least {needed}")]
    WindowTooSmall { found: usize, needed: usize },

    #[error("series and pseudospectral estimate come from different grids")]
    GridMismatch,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("need at least {needed} rows, found {found}")]
    InsufficientRows { found: usize, needed: usize },

    #[error("degenerate design matrix: {0}")]
    DegenerateDesign(String),

    #[error("factor `{profile}` failed its non-degeneracy check: {reason}")]
    FactorCheckFailed { profile: String, reason: String },

    #[error("2D grid {n1}x{n2} exceeds the {cap}x{cap} cap")]
    GridTooLarge { n1: usize, n2: usize, cap: usize },

    #[error("empty results")]
    EmptyResults,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

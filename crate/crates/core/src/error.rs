use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dense oracle refused: dimension {dim} exceeds limit {limit}")]
    OracleTooLarge { dim: usize, limit: usize },

    #[error("no chaotic sea for K = {kick} ({tried} candidate points tried)")]
    NoChaoticSea { kick: f64, tried: usize },

    #[error("insufficient decay: fit window has {points} points (need at least 4)")]
    InsufficientDecay { points: usize },

    #[error("regime refused: {0}")]
    Regime(String),

    #[error("resource refused: {required_bytes} bytes required, budget is {budget_bytes} bytes")]
    Resource { required_bytes: u64, budget_bytes: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

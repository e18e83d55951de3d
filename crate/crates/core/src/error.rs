use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),
    #[error("invalid integrator settings: {0}")]
    Integrator(String),
    #[error("numerical blow-up: {0}")]
    BlowUp(String),
    #[error("time window: {0}")]
    Window(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("fock: {0}")]
    Fock(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

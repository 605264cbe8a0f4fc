use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("weight mismatch: {0} vs {1}")]
    WeightMismatch(i32, i32),
    #[error("fields live on different collars")]
    GridMismatch,
    #[error("jet order exhausted: need {need}, have {have}")]
    JetExhausted { need: usize, have: usize },
    #[error("convexity failure: {0}")]
    Convexity(String),
    #[error("collar jacobian is singular (condition number {0:e})")]
    SingularCollar(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("least-squares fit is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("flow failure: {0}")]
    Flow(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

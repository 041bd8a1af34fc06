use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("user {0} has an all-zero channel")]
    DegenerateChannel(usize),

    /// The SINR target cannot be met for `user` even with every BS at full power.
    #[error("infeasible instance: user {user} needs rate {lower} but at most {upper} is reachable")]
    InfeasibleInstance { user: usize, lower: f64, upper: f64 },

    #[error("malformed box: {0}")]
    MalformedBox(String),

    #[error("cone solver failure: {0}")]
    Solver(String),

    #[error("oracle refused: {0}")]
    CostGuard(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

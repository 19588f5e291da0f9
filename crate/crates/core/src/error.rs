use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("agent speed {agent_speed} m/s does not exceed estimated target speed {target_speed} m/s")]
    SpeedInfeasible { agent_speed: f64, target_speed: f64 },

    #[error("position covariance is not positive definite (det = {det})")]
    DegenerateEllipse { det: f64 },

    #[error("no spiral phase root found after {expansions} bracket expansions from theta = {theta}")]
    StepFailure { theta: f64, expansions: u32 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("process noise covariance is not positive semidefinite")]
    NotPsd,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("planner error: {0}")]
    Planner(String),

    #[error("I/O error at {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

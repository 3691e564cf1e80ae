use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("dimension {dim} too large for sign-vector enumeration (max {max})")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "thinning bound violated: rate {rate} exceeds bound {bound} at t={time} \
         (the dominating rate does not majorise the true rate)"
    )]
    ThinningBoundViolation { rate: f64, bound: f64, time: f64 },

    #[error("event budget exhausted: more than {0} events before the horizon")]
    EventBudgetExhausted(u64),

    #[error("fast-subsystem statistics require Λ_L = I, got a deviating entry {0}")]
    LambdaLNotIdentity(f64),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

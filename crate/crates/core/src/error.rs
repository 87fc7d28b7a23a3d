use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("position {x} outside box [-{half}, {half}]")]
    OutOfBox { x: f64, half: f64 },

    #[error("mode coefficient blew up (|a| = {magnitude:e}) at t = {time}")]
    BlowUp { magnitude: f64, time: f64 },

    #[error("CFL condition violated: dt = {dt} exceeds stable limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("malformed data in {path}: {reason}")]
    Malformed { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

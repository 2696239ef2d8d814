//! Configuration, task drivers, result persistence and the verification
//! suite behind the `weakmean` binary.

pub mod config;
pub mod record;
pub mod tasks;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] weakmean::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

impl CliError {
    /// 2 for anything the user can fix in the config or environment, 3 for
    /// violated internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(weakmean::Error::InvariantViolation(_)) => EXIT_INVARIANT,
            CliError::Json(_) | CliError::Csv(_) => EXIT_INVARIANT,
            _ => EXIT_CONFIG,
        }
    }
}

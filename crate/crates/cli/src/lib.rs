//! Configuration, interchange formats and dispatch for the `dirac` binary.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure (including a verification report that did not pass), 1 anything
//! else.

pub mod config;
pub mod io;
pub mod run;

pub use config::{load_config, parse_config, Command, Format, JobConfig, Overrides, Source};
pub use run::{exit_code, run, Outcome, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<dirac_core::Error> for CliError {
    fn from(e: dirac_core::Error) -> Self {
        use dirac_core::Error as E;
        match e {
            E::Config(_) | E::Domain { .. } | E::Dimension { .. } | E::NonFinite(_) => {
                CliError::Config(e.to_string())
            }
            E::WrongFlavor { .. } => CliError::Internal(e.to_string()),
            e if e.is_numeric() => CliError::Numeric(e.to_string()),
            e => CliError::Internal(e.to_string()),
        }
    }
}

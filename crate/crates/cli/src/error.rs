use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(drmot::Error),
    #[error("{0}")]
    Solver(drmot::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(e: drmot::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Infeasible(_) => ExitCode::from(2),
            CliError::Config(_) => ExitCode::from(3),
            CliError::Solver(_) | CliError::Io(_) => ExitCode::from(1),
        }
    }
}

impl From<drmot::Error> for CliError {
    fn from(e: drmot::Error) -> Self {
        match e {
            drmot::Error::InfeasibleRadius { .. } | drmot::Error::NotConvexOrdered => CliError::Infeasible(e),
            other => CliError::Solver(other),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

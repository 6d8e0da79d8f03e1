use std::path::PathBuf;
use std::process::ExitCode;

use slqwave::SlqError;
use thiserror::Error;

use crate::config::Origin;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}: {msg}")]
    Config { origin: Origin, msg: String },

    #[error(transparent)]
    Solver(#[from] SlqError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),

    #[error("check failed: {0}")]
    Breach(String),
}

impl CliError {
    /// 2 for configuration and validation errors, 3 for failed checks,
    /// 1 for everything else.
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config { .. } => 2,
            CliError::Solver(e) if is_config_error(e) => 2,
            CliError::Breach(_) => 3,
            _ => 1,
        })
    }
}

fn is_config_error(e: &SlqError) -> bool {
    use SlqError::*;
    matches!(
        e,
        TooFewCells { .. }
            | InvalidLength(_)
            | InvalidTimeGrid(_)
            | BoundaryViolation { .. }
            | InvalidData(_)
            | MultiplicativeNoise
            | StepTooLarge { .. }
            | NoSamples
            | TreeTooLarge(_)
            | NotNested(_)
            | NotDivisible { .. }
    )
}

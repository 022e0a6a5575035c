//! Command implementations behind the `nlgm` binary: single solves,
//! (λ, μ) existence-map sweeps, estimate verification batches, and the
//! tail-divergence probe.

pub mod commands;
pub mod config;
pub mod meta;
pub mod sweep;

use nlgm_core::Error as CoreError;

/// Process-level failure, carrying the exit code contract:
/// 0 success, 1 configuration or hypothesis violation, 2 non-convergence
/// (or failed verification checks). No other codes exist.
#[derive(Debug)]
pub enum Failure {
    /// Exit code 1.
    Usage(String),
    /// Exit code 2.
    Outcome(String),
}

impl Failure {
    pub fn usage(msg: String) -> Failure {
        Failure::Usage(msg)
    }

    pub fn outcome(msg: String) -> Failure {
        Failure::Outcome(msg)
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Outcome(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Outcome(m) => m,
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Failure {
        match e {
            // iteration caps are numerical non-convergence, everything else
            // is a configuration or hypothesis problem
            CoreError::IterationLimit { .. } => Failure::Outcome(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

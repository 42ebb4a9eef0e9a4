//! Error classification and stable process exit codes.
//!
//! Every failure is sorted into one of three classes so scripts can branch
//! on the exit status: bad invocation or configuration (3), invalid input
//! data or I/O trouble (1), and estimator non-convergence (2).

use leadflow_core::corpus::CorpusError;
use leadflow_core::econometrics::EconError;
use leadflow_core::leadership::LeadershipError;
use leadflow_core::proximity::ProximityError;
use leadflow_core::synth::SynthError;
use leadflow_core::topicmodel::LdaError;
use std::fmt;

/// A classified command failure.
#[derive(Debug)]
pub enum CliError {
    /// Bad command line or configuration file (exit 3).
    Usage(String),
    /// Invalid or inconsistent input data, or an I/O failure (exit 1).
    Data(String),
    /// An estimator failed to converge (exit 2).
    NonConvergence(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }

    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Usage(_) => 3,
        }
    }

    /// Short class tag used in error output.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::NonConvergence(_) => "non-convergence",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::NonConvergence(m) => {
                f.write_str(m)
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LeadershipError> for CliError {
    fn from(e: LeadershipError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ProximityError> for CliError {
    fn from(e: ProximityError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LdaError> for CliError {
    fn from(e: LdaError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EconError> for CliError {
    fn from(e: EconError) -> Self {
        match e {
            EconError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            // Generator configs come straight from the config file, so a bad
            // one is an invocation problem, not a data problem.
            SynthError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            SynthError::Corpus(inner) => CliError::Data(inner.to_string()),
        }
    }
}

//! File formats, run manifests and the `hoptomo` command-line pipeline on
//! top of [`hoptomo_core`].

pub use hoptomo_core as core;

pub mod cli;
pub mod formats;
pub mod manifest;

use serde::Serialize;

/// Exit code for malformed input or failed validation.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code when a conic solve fails to converge.
pub const EXIT_SOLVER: i32 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: "validation",
            message: message.into(),
            exit_code: EXIT_VALIDATION,
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Self {
            kind: "solver",
            message: message.into(),
            exit_code: EXIT_SOLVER,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: "io",
            message: message.into(),
            exit_code: EXIT_VALIDATION,
        }
    }

    pub fn from_io(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }

    pub fn from_csv(e: csv::Error) -> Self {
        Self::validation(format!("csv: {e}"))
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"kind\":\"{}\"}}", self.kind))
    }
}

impl From<hoptomo_core::Error> for CliError {
    fn from(e: hoptomo_core::Error) -> Self {
        use hoptomo_core::Error as E;
        match e {
            E::Solver(_) | E::Numerical(_) => Self::solver(e.to_string()),
            other => Self::validation(other.to_string()),
        }
    }
}

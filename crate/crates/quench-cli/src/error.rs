//! Process-level error taxonomy.
//!
//! Every failure is reported as one machine-readable JSON object on stderr
//! and an exit code: `2` for anything wrong with the inputs (config,
//! arguments, files), `3` when the solver ran but did not meet its
//! stationarity target (artifacts are still written in that case).

use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, arguments, or input data.
    Validation(String),
    /// Filesystem trouble reading inputs or writing artifacts.
    Io(String),
    /// The solver finished without reaching its stationarity target.
    NonConvergence(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    error: ErrorBody<'a>,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        Self::Validation(message)
    }

    pub fn io(message: String) -> Self {
        Self::Io(message)
    }

    pub fn non_convergence(message: String) -> Self {
        Self::NonConvergence(message)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Validation(_) => "validation",
            Self::Io(_) => "io",
            Self::NonConvergence(_) => "non_convergence",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Validation(m) | Self::Io(m) | Self::NonConvergence(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) | Self::Io(_) => EXIT_VALIDATION,
            Self::NonConvergence(_) => EXIT_NON_CONVERGENCE,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let envelope = ErrorEnvelope {
            error: ErrorBody { kind: self.kind(), message: self.message().to_string() },
        };
        serde_json::to_string(&envelope).expect("error envelope serializes")
    }
}
